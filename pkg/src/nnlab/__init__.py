"""Simulation and analytic bounds for components of continuum nearest-neighbor graphs."""

__version__ = "0.1.0"
