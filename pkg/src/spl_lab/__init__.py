"""Simulation laboratory for stable parallel looped (SPL) dynamical networks."""

__version__ = "0.1.0"
