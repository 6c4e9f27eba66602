"""Energy-constrained exploration with incremental-resolution symbolic perception."""

__version__ = "0.1.0"
