"""Configuration-driven sweeps that write eigenvalue and matrix tables."""

from .main import main

__all__ = ["main"]
