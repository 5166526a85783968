"""Numerical lab for radial fast diffusion: solver, exact solutions, constants and estimate checks."""

__version__ = "0.1.0"
