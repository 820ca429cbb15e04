"""Simulation-based search for small parameter deviations that make a
controlled system violate an STL requirement."""

__version__ = "0.1.0"
