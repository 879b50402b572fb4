"""Exception hierarchy shared by every module in the package."""


class HcrbError(Exception):
    """Base class for all package errors."""

    kind = "HcrbError"

    def to_dict(self):
        return {"error": self.kind, "message": str(self)}


class NumericalError(HcrbError):
    kind = "NumericalError"


class ShapeMismatch(HcrbError, ValueError):
    kind = "ShapeMismatch"


class NotSymmetric(NumericalError):
    kind = "NotSymmetric"


class IllConditioned(NumericalError):
    kind = "IllConditioned"

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition

    def to_dict(self):
        d = super().to_dict()
        d["condition"] = self.condition
        return d


class SingularGeometry(IllConditioned):
    kind = "SingularGeometry"


class PoleHit(NumericalError):
    kind = "PoleHit"


class DegenerateSigma(HcrbError, ValueError):
    kind = "DegenerateSigma"


class NonMonotoneDetected(NumericalError):
    kind = "NonMonotoneDetected"


class ConfigError(HcrbError, ValueError):
    kind = "ConfigError"


class ParseError(ConfigError):
    kind = "ParseError"


class ValidationError(ConfigError):
    kind = "ValidationError"

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field

    def to_dict(self):
        d = super().to_dict()
        d["field"] = self.field
        return d
