"""vertab: verified tabular benchmark synthesis and evaluation."""

__version__ = "0.1.0"
