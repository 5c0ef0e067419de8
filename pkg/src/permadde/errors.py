"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`PermaddeError`,
so callers (the CLI in particular) can separate bad input from bugs.
"""


class PermaddeError(Exception):
    """Base class for package errors."""


class ModelError(PermaddeError, ValueError):
    pass


class ArityMismatch(ModelError):
    pass


class UnknownPreset(ModelError):
    pass


class BadParams(ModelError):
    pass


class ModelFormatError(ModelError):
    """Malformed model document (JSON syntax, schema, or semantic)."""


class InvalidModel(ModelError):
    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"model failed validation: {lines}")


class InadmissibleHistory(ModelError):
    pass


class IntegrationError(PermaddeError, ArithmeticError):
    """Raised when a run cannot be completed."""


class NonFiniteValue(IntegrationError):
    pass


class PositivityLoss(IntegrationError):
    pass


class OutOfRange(PermaddeError, ValueError):
    pass


class FamilyMismatch(PermaddeError, ValueError):
    pass


class UnsupportedFamily(PermaddeError, ValueError):
    pass


class EnvelopeUnavailable(PermaddeError, ValueError):
    pass


class NoSignChange(PermaddeError, ValueError):
    pass


class HorizonTooShort(PermaddeError, ValueError):
    pass


class NotCertified(PermaddeError, ValueError):
    pass


class GridMismatch(PermaddeError, ValueError):
    pass


class BadParamPath(PermaddeError, ValueError):
    pass
