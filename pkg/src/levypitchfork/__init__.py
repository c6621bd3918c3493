"""Simulation and numerical analysis of dX = (beta X - X^3) dt + sigma dL^alpha."""

__version__ = "0.1.0"
