"""Sampling and mode finding for strongly log-concave subset distributions."""

__version__ = "0.1.0"
