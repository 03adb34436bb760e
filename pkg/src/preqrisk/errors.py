"""Exception hierarchy shared by every module.

Errors that signal bad input or configuration carry ``exit_code = 1`` so the
CLI can map them onto its validation exit status; everything else is a
runtime failure (exit 2).
"""


class PreqriskError(Exception):
    exit_code = 2


class ValidationError(PreqriskError, ValueError):
    """Input data violates a type invariant."""

    exit_code = 1


class ParseError(ValidationError):
    """A row of an input file could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InsufficientDataError(ValidationError):
    pass


class ConfigurationError(ValidationError):
    pass


class ParameterError(ValidationError):
    pass


class BoundaryError(ParameterError):
    pass


class InfiniteMeanError(ParameterError):
    pass


class AlignmentError(PreqriskError, ValueError):
    pass


class ModelError(PreqriskError):
    pass


class UnsupportedModelError(ModelError):
    pass


class ReproducibilityError(PreqriskError):
    pass
