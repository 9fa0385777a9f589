"""Simulated public-key encryption with publicly verifiable deletion."""

__version__ = "0.1.0"
