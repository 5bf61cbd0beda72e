"""Generalized adaptive rejection sampling and likelihood bounds."""

from . import bounds, envelope, errors, model, samplers

__version__ = "0.1.0"

__all__ = ["bounds", "envelope", "errors", "model", "samplers", "__version__"]
