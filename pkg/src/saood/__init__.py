"""Supervision-adaptation training and evaluation for OOD-aware classifiers."""

__version__ = "0.1.0"
