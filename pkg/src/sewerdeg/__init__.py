"""Sewer-pipe degradation model selection and inspection planning."""

from sewerdeg.errors import MissingArtifactError, NumericalError, ValidationError

__version__ = "0.1.0"

__all__ = ["MissingArtifactError", "NumericalError", "ValidationError", "__version__"]
