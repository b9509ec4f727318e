"""Exception types shared across the package.

The CLI maps :class:`ValidationError` to exit code 2 and
:class:`NumericalError` to exit code 3.
"""


class ValidationError(ValueError):
    """Input data or arguments violate a documented contract."""


class MissingArtifactError(ValidationError):
    """A command needs an artifact that an earlier command should have written."""

    def __init__(self, path, command):
        self.path = str(path)
        self.command = command
        super().__init__(f"missing artifact {self.path}; run `{command}` first")


class NumericalError(ArithmeticError):
    """A numerical procedure failed (singular system, non-finite loss, ...)."""
