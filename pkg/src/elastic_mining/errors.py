"""Exception types shared across the package.

The CLI maps each class onto a stable exit code, so new failure modes should
subclass one of these rather than raising bare ``ValueError``.
"""


class DomainError(ValueError):
    """A model parameter lies outside the region the model is defined on."""


class PreconditionError(ValueError):
    """Numeric input is well-formed but unusable (too short, degenerate, ...)."""


class DataError(ValueError):
    """Malformed input data, e.g. a bad CSV row or misaligned dates."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
