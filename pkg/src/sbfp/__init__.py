"""Shifted Brownian fluctuation process: simulation, transforms, turning point and game."""

__version__ = "0.1.0"
