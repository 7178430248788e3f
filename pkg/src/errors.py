"""Exception hierarchy shared by every resetlab module."""

from typing import Optional


class ResetLabError(Exception):
    """Base class for all resetlab failures"""


class CircuitError(ResetLabError):
    """A circuit violates an IR invariant"""


class ParseError(ResetLabError):
    """Circuit text could not be parsed"""

    def __init__(self, line: int, message: str, column: int = 1, token: str = ""):
        self.line = max(1, line)
        self.column = max(1, column)
        self.message = message or "syntax error"
        self.token = token
        super().__init__(f"line {self.line}, column {self.column}: {self.message}"
                         + (f" (near {token!r})" if token else ""))


class SimulationError(ResetLabError):
    pass


class AnalyticsError(ResetLabError):
    pass


class SpliceError(ResetLabError):
    pass


class BillingError(ResetLabError):
    pass


class CatalogError(ResetLabError):
    """Pricing catalog file is malformed"""

    def __init__(self, line: int, message: str):
        self.line = line
        self.message = message
        super().__init__(f"catalog line {line}: {message}")


class ReceiptError(ResetLabError):
    """Receipt CSV row is malformed"""

    def __init__(self, row: int, message: str, field: Optional[str] = None):
        self.row = row
        self.field = field
        super().__init__(f"receipt row {row}: {message}")


class MetricsError(ResetLabError):
    pass


class BenchError(ResetLabError):
    pass


class GuardrailError(ResetLabError):
    pass
