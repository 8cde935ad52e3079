"""Custom exception classes for the application.

This module defines all custom exceptions used throughout the application,
providing consistent error handling and messaging. Every exception carries
the CLI exit code it maps to and, in ``details["module"]``, the module whose
precondition was violated.
"""

from typing import Any

from src.core.constants import EXIT_NUMERICAL, EXIT_VALIDATION


class MonotonicityError(Exception):
    """Base exception for all application exceptions.

    Attributes:
        message: Human-readable error message.
        code: Machine-readable error code.
        exit_code: Process exit code used by the CLI.
        details: Additional error details.
    """

    def __init__(
        self,
        message: str = "An error occurred",
        code: str = "ERROR",
        exit_code: int = EXIT_VALIDATION,
        details: dict[str, Any] | None = None,
    ) -> None:
        """Initialize the exception.

        Args:
            message: Human-readable error message.
            code: Machine-readable error code.
            exit_code: Process exit code used by the CLI.
            details: Additional error details.
        """
        super().__init__(message)
        self.message = message
        self.code = code
        self.exit_code = exit_code
        self.details = details or {}

    @property
    def module(self) -> str:
        """Module that raised the error."""
        return str(self.details.get("module", "unknown"))

    def to_dict(self) -> dict[str, Any]:
        """Convert exception to dictionary for logs and manifests.

        Returns:
            Dictionary representation of the exception.
        """
        return {
            "error": {
                "code": self.code,
                "message": self.message,
                "details": self.details,
            }
        }


# =============================================================================
# Validation errors (exit code 1)
# =============================================================================


class ValidationError(MonotonicityError):
    """Exception raised when a precondition is violated."""

    def __init__(
        self,
        message: str = "Validation failed",
        module: str = "unknown",
        code: str = "VALIDATION_ERROR",
        details: dict[str, Any] | None = None,
    ) -> None:
        """Initialize the exception.

        Args:
            message: Human-readable error message.
            module: Module whose precondition was violated.
            code: Machine-readable error code.
            details: Additional error details.
        """
        super().__init__(
            message=message,
            code=code,
            exit_code=EXIT_VALIDATION,
            details={"module": module, **(details or {})},
        )


class MeshError(ValidationError):
    """Exception raised for invalid mesh construction parameters."""

    def __init__(
        self,
        message: str = "Invalid mesh",
        details: dict[str, Any] | None = None,
    ) -> None:
        super().__init__(message, module="mesh", code="MESH_ERROR", details=details)


class RegionError(ValidationError):
    """Exception raised when region specifications violate the inclusion assumptions."""

    def __init__(
        self,
        message: str = "Invalid region specification",
        region_ids: list[str] | None = None,
    ) -> None:
        details = {"region_ids": region_ids} if region_ids else {}
        super().__init__(message, module="mesh", code="REGION_ERROR", details=details)
        self.region_ids = region_ids or []


class MaterialError(ValidationError):
    """Exception raised for invalid Lame parameter fields."""

    def __init__(
        self,
        message: str = "Invalid material field",
        details: dict[str, Any] | None = None,
    ) -> None:
        super().__init__(
            message, module="materials", code="MATERIAL_ERROR", details=details
        )


class BasisMismatchError(ValidationError):
    """Exception raised when operators built in different load bases are combined.

    Attributes:
        expected: Fingerprint that was required.
        actual: Fingerprint that was found.
    """

    def __init__(
        self,
        expected: str,
        actual: str,
        module: str = "ndmap",
    ) -> None:
        """Initialize the exception.

        Args:
            expected: Fingerprint that was required.
            actual: Fingerprint that was found.
            module: Module that detected the mismatch.
        """
        super().__init__(
            f"Load basis fingerprint mismatch: expected {expected[:12]}, got {actual[:12]}",
            module=module,
            code="BASIS_MISMATCH",
            details={"expected": expected, "actual": actual},
        )
        self.expected = expected
        self.actual = actual


class ParameterRangeError(ValidationError):
    """Exception raised when a numeric parameter leaves its admissible range.

    Attributes:
        parameter: Name of the offending parameter.
        value: Value that was supplied.
    """

    def __init__(
        self,
        parameter: str,
        value: float,
        requirement: str,
        module: str,
    ) -> None:
        """Initialize the exception.

        Args:
            parameter: Name of the offending parameter.
            value: Value that was supplied.
            requirement: Human-readable admissible range.
            module: Module whose precondition was violated.
        """
        super().__init__(
            f"{parameter}={value:g} violates {requirement}",
            module=module,
            code="PARAMETER_RANGE",
            details={"parameter": parameter, "value": value, "requirement": requirement},
        )
        self.parameter = parameter
        self.value = value


class ConfigError(ValidationError):
    """Exception raised when a scenario file cannot be read or applied."""

    def __init__(
        self,
        message: str = "Invalid configuration",
        errors: list[dict[str, Any]] | None = None,
    ) -> None:
        super().__init__(
            message, module="cli", code="CONFIG_ERROR", details={"errors": errors or []}
        )
        self.errors = errors or []


# =============================================================================
# Numerical errors (exit code 2)
# =============================================================================


class NumericalError(MonotonicityError):
    """Exception raised when a numerical procedure fails."""

    def __init__(
        self,
        message: str = "Numerical failure",
        module: str = "fem",
        code: str = "NUMERICAL_ERROR",
        details: dict[str, Any] | None = None,
    ) -> None:
        super().__init__(
            message=message,
            code=code,
            exit_code=EXIT_NUMERICAL,
            details={"module": module, **(details or {})},
        )


class SolverError(NumericalError):
    """Exception raised when a linear solve does not reach the required residual.

    Attributes:
        residual: Relative residual that was reached.
    """

    def __init__(self, residual: float, message: str | None = None) -> None:
        """Initialize the exception.

        Args:
            residual: Relative residual that was reached.
            message: Optional override of the default message.
        """
        super().__init__(
            message or f"Linear solve did not converge (relative residual {residual:.3e})",
            module="fem",
            code="SOLVER_ERROR",
            details={"residual": residual},
        )
        self.residual = residual


class SingularSystemError(NumericalError):
    """Exception raised when the reduced stiffness matrix is singular."""

    def __init__(self, message: str = "Stiffness matrix is singular") -> None:
        super().__init__(message, module="fem", code="SINGULAR_SYSTEM")
