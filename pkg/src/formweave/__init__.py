"""formweave: interactive e-form generation from cardinality-based feature models."""

__version__ = "0.1.0"
