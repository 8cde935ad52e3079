"""Logging utility functions.

structlog renders through the standard library so that the console
handler and the optional log file share one pipeline. Console lines go to
stderr; files written by a command are its only stdout-free output.
"""

import functools
import logging
import sys
import time
from collections.abc import Callable
from pathlib import Path
from typing import Any, TypeVar

import structlog

F = TypeVar("F", bound=Callable[..., Any])

_installed: list[logging.Handler] = []

_PRE_CHAIN: list[Any] = [
    structlog.contextvars.merge_contextvars,
    structlog.stdlib.add_log_level,
    structlog.stdlib.add_logger_name,
    structlog.processors.TimeStamper(fmt="iso"),
]


def _formatter(renderer: Any) -> structlog.stdlib.ProcessorFormatter:
    return structlog.stdlib.ProcessorFormatter(
        processors=[structlog.stdlib.ProcessorFormatter.remove_processors_meta, renderer],
        foreign_pre_chain=_PRE_CHAIN,
    )


def setup_logging(
    log_level: str = "INFO",
    log_format: str = "text",
    log_file: str | None = None,
) -> None:
    """Configure structured logging for one process.

    Safe to call repeatedly; handlers of a previous call are replaced.

    Args:
        log_level: Logging level name.
        log_format: Console format, ``json`` or ``text``.
        log_file: Optional file receiving JSON lines.
    """
    level = logging.getLevelName(log_level.upper())
    if not isinstance(level, int):
        level = logging.INFO

    structlog.configure(
        processors=[*_PRE_CHAIN, structlog.stdlib.ProcessorFormatter.wrap_for_formatter],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    console = logging.StreamHandler(sys.stderr)
    if log_format == "json":
        console.setFormatter(_formatter(structlog.processors.JSONRenderer()))
    else:
        console.setFormatter(_formatter(structlog.dev.ConsoleRenderer(colors=False)))
    handlers: list[logging.Handler] = [console]

    if log_file:
        path = Path(log_file)
        path.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(path, encoding="utf-8")
        file_handler.setFormatter(_formatter(structlog.processors.JSONRenderer()))
        handlers.append(file_handler)

    root = logging.getLogger()
    for handler in _installed:
        root.removeHandler(handler)
        handler.close()
    _installed[:] = handlers
    for handler in handlers:
        root.addHandler(handler)
    root.setLevel(level)


def bind_run_context(**values: Any) -> None:
    """Attach values to every record of the current command run."""
    structlog.contextvars.clear_contextvars()
    structlog.contextvars.bind_contextvars(**values)


def get_logger(name: str = __name__) -> structlog.stdlib.BoundLogger:
    """Get a structured logger.

    Args:
        name: Logger name.

    Returns:
        Bound logger instance.
    """
    return structlog.get_logger(name)


class LoggerMixin:
    """Gives handlers and services a ``logger`` tagged with their component name."""

    @property
    def logger(self) -> structlog.stdlib.BoundLogger:
        cls = type(self)
        return get_logger(cls.__module__).bind(component=cls.__name__)


def log_duration(logger: structlog.BoundLogger, event: str) -> Callable[[F], F]:
    """Decorator logging the wall time of a call.

    Args:
        logger: Logger to use.
        event: Event name of the completion record.

    Returns:
        Decorator function.
    """

    def decorator(func: F) -> F:
        @functools.wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            start = time.perf_counter()
            try:
                return func(*args, **kwargs)
            except Exception as e:
                logger.error(
                    "Call failed",
                    function=func.__name__,
                    error=str(e),
                )
                raise
            finally:
                logger.debug(
                    event,
                    function=func.__name__,
                    duration_ms=round((time.perf_counter() - start) * 1000.0, 2),
                )

        return wrapper  # type: ignore[return-value]

    return decorator
