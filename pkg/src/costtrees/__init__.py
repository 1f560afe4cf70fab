"""Cost-aware robust tree ensembles."""

__version__ = "0.1.0"
