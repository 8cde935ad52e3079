"""Utility modules for the application.

This package contains utility functions and helpers for
file handling, logging and deterministic parallelism.
"""

from src.utils.file_utils import FileUtils
from src.utils.logging_utils import LoggerMixin, bind_run_context, get_logger, setup_logging
from src.utils.parallel_utils import ordered_map

__all__ = [
    "FileUtils",
    "LoggerMixin",
    "ordered_map",
    "setup_logging",
    "bind_run_context",
    "get_logger",
]
