"""Simulation and verification toolkit for Poisson cylinder percolation."""

__version__ = "0.1.0"
