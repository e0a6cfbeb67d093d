# exceptions.py


class OrdcopError(Exception):
    """Base class for all ordcop errors"""
    exit_code = 1


# --- Validation errors (exit code 2) ---

class ValidationError(OrdcopError, ValueError):
    exit_code = 2


class SampleValidationError(ValidationError):
    pass


class ParameterDomainError(ValidationError):
    pass


class DomainError(ValidationError):
    """Argument outside the domain of a special function"""


class ConfigError(ValidationError):
    pass


class MissingDataError(ValidationError):
    pass


# --- Numerical failures (exit code 3) ---

class NumericalError(OrdcopError):
    exit_code = 3


class OptimizationError(NumericalError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class RootBracketingError(NumericalError):
    pass


class FitError(NumericalError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SelectionError(NumericalError):
    pass


class DiagnosticError(NumericalError):
    pass
