"""Training and inference toolkit for semantically consistent image completion."""

__version__ = "0.1.0"
