"""Exceptions raised by the toolkit services.

Every error carries the name of the operation it originated from so the CLI
can surface it verbatim.
"""
from typing import Optional


class ToolkitError(Exception):
    """Base class for all toolkit failures"""

    def __init__(self, message: str, operation: str = ""):
        super().__init__(message)
        self.operation = operation

    def __str__(self) -> str:
        message = super().__str__()
        return f"[{self.operation}] {message}" if self.operation else message


class DomainError(ToolkitError):
    """Argument outside the admissible domain of an operation"""


class DescriptorError(ToolkitError):
    """Malformed JSON/CSV input descriptor"""

    def __init__(self, message: str, location: str = "", operation: str = "parse"):
        super().__init__(f"{location}: {message}" if location else message, operation)
        self.location = location


class QuadratureToleranceError(ToolkitError):
    """Requested tolerance not reachable within the recursion depth budget"""


class BoundaryEvaluationError(ToolkitError):
    """Pointwise evaluation requested on the unit circle"""


class PoleError(ToolkitError):
    """Exterior evaluation at a reflected zero or on the reflected singular support"""


class ZeroOnCircleError(ToolkitError):
    """A Blaschke zero lies on the circle where a minimum modulus was requested"""


class ConstantFunctionError(ToolkitError):
    """A non-constant inner function was required"""


class TaylorPrecisionError(ToolkitError):
    """Taylor coefficients cannot be resolved to the requested accuracy"""

    def __init__(self, message: str, error_bound: float, operation: str = "taylor"):
        super().__init__(message, operation)
        self.error_bound = error_bound


class CoverBudgetError(ToolkitError):
    """A stage cover violates the 4^-n length budget"""

    def __init__(self, message: str, stage: int, operation: str = "besicovitch_build"):
        super().__init__(f"{message} (stage {stage})", operation)
        self.stage = stage


class PrefixExhaustedError(ToolkitError):
    """The finite breakpoint prefix is too short; deeper covers are needed"""

    def __init__(self, message: str, stage_required: Optional[int] = None, operation: str = ""):
        hint = f" (need deeper covers: at least {stage_required} stages)" if stage_required else ""
        super().__init__(f"{message}{hint}", operation)
        self.stage_required = stage_required


class SupportError(ToolkitError):
    """Measure not supported on the given compact set"""


class EmptyMeasureError(ToolkitError):
    """A non-zero measure was required"""


class NotInvertibleError(ToolkitError):
    """Operator is not invertible"""


class ConditioningError(ToolkitError):
    """Two routes for the same quantity disagree beyond tolerance"""

    def __init__(self, message: str, diagnostics: Optional[dict] = None, operation: str = ""):
        super().__init__(message, operation)
        self.diagnostics = diagnostics or {}


class GramConditionError(ToolkitError):
    """Gram matrix of a truncated basis is numerically singular"""

    def __init__(self, message: str, min_eigenvalue: float, operation: str = "build_truncation"):
        super().__init__(message, operation)
        self.min_eigenvalue = min_eigenvalue


class NotContractionError(ToolkitError):
    """Matrix norm exceeds one beyond tolerance"""

    def __init__(self, message: str, norm: float, operation: str = "defects"):
        super().__init__(message, operation)
        self.norm = norm


class DegenerateDefectError(ToolkitError):
    """Defect spaces are zero-dimensional (unitary input)"""


class ResolventError(ToolkitError):
    """I - lambda T* is singular"""
