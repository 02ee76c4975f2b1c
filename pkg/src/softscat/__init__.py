"""Multi-frequency reconstruction of sound-soft obstacles in two dimensions."""

__version__ = "0.1.0"
