"""Explicit dimension estimates for nonautonomous systems over valued fields."""

__version__ = "0.1.0"
