"""Temporal convolutional network intrusion detector built on numpy."""

__version__ = "0.1.0"
