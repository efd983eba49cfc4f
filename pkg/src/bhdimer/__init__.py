"""Simulation engine for the dissipative Bose-Hubbard dimer."""

__version__ = "0.1.0"
