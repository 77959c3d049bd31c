"""Finite-horizon parameter exclusion for families of rational maps."""

__version__ = "0.1.0"
