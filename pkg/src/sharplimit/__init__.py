"""Numerical lab for a tumor-growth phase-field model and its sharp-interface limit."""

__version__ = "0.1.0"
