from typing import List, Optional


class VNEError(Exception):
    """Base exception for embedding, simulation and file-format failures."""
    pass


class InputError(VNEError, ValueError):
    """Raised on malformed arguments, unknown ids or structural violations."""
    pass


class ParseError(InputError):
    """Raised when a topology, workload or summary file cannot be parsed."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class RejectionError(VNEError):
    """Raised when an allocation does not fit the current residuals."""

    def __init__(self, message: str, kind: str, element_id: int):
        super().__init__(message)
        self.kind = kind
        self.element_id = element_id


class AllocationStateError(VNEError, RuntimeError):
    """Raised when a mapping is released twice or was never allocated."""
    pass


class EvaluationError(VNEError):
    pass


class SelectionError(VNEError):
    pass


class SimulationError(VNEError):
    """Raised when a solver hands the simulator an invalid mapping."""

    def __init__(self, message: str, violations: Optional[List[str]] = None):
        super().__init__(message)
        self.violations = violations or []
