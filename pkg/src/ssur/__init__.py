"""Rare-event network failure probabilities by refined stratification of the failure count (SSuR)."""

__version__ = "0.1.0"
