"""Exception hierarchy for phs_regulator"""

from typing import Any, Optional


class PhsRegulatorError(Exception):
    """Base class for all errors raised by the package"""


class ModelFormatError(PhsRegulatorError, ValueError):
    """A model/controller document could not be parsed.

    Args:
        path: key path of the offending entry, e.g. ``W2[1][3]``
        message: what is wrong at that path
    """

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class DimensionError(PhsRegulatorError, ValueError):
    """A matrix does not have the shape its role requires"""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class UnsupportedOrderError(PhsRegulatorError):
    """The requested operation does not support this PHS order"""


class AssumptionError(PhsRegulatorError):
    """A structural/passivity assumption failed; carries the report"""

    def __init__(self, message: str, report: Any = None):
        self.report = report
        super().__init__(message)


class DiscretizationError(PhsRegulatorError):
    """Spatial discretization could not be assembled"""


class FeedbackError(PhsRegulatorError):
    """Output feedback is ill-posed (singular I + D·K)"""


class ResolventSingularError(PhsRegulatorError):
    """λ is (numerically) an eigenvalue of A"""

    def __init__(self, lam: complex, condition: float, context: str = ""):
        self.lam = lam
        self.condition = condition
        where = f" ({context})" if context else ""
        super().__init__(
            f"resolvent singular at lambda={lam}{where}, condition estimate {condition:.3e}"
        )


class ControllerError(PhsRegulatorError, ValueError):
    """Invalid internal-model controller data"""


class NoStableGainError(PhsRegulatorError):
    """No gain of the sweep grid stabilizes the closed loop"""

    def __init__(self, message: str, table: Optional[list] = None):
        self.table = table or []
        super().__init__(message)


class StepSizeError(PhsRegulatorError):
    """Time step too coarse for the signal frequencies"""


class DecayRateUndefinedError(PhsRegulatorError):
    """Tracking error is below the noise floor everywhere"""


class ConfigError(PhsRegulatorError, ValueError):
    """Invalid configuration value or command option"""
