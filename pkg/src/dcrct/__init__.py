"""Data-consistent CT reconstruction for field-of-view extension."""

__version__ = "0.1.0"
