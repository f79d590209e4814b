"""Exception types shared across the package."""


class RuleCircuitError(Exception):
    """Base class for all package-specific errors."""


class TripleParseError(RuleCircuitError, ValueError):
    """Malformed line in a triple file."""

    def __init__(self, message: str, path: str, line_no: int):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class RuleParseError(RuleCircuitError, ValueError):
    """Malformed line in a rule file."""

    def __init__(self, message: str, line_no: int, column: int = 0):
        loc = f"line {line_no}" + (f", col {column}" if column else "")
        super().__init__(f"{loc}: {message}")
        self.line_no = line_no
        self.column = column


class EmptyProgramError(RuleCircuitError, ValueError):
    """A rule filter or load produced no rules; downstream learning is undefined."""


class CircuitStructureError(RuleCircuitError, ValueError):
    """A circuit violates smoothness, decomposability, or normalization."""


class StageError(RuleCircuitError, RuntimeError):
    """A pipeline stage cannot run (missing or mismatched upstream artifact)."""
