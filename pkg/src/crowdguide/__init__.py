"""Multi-robot guided crowd evacuation: simulation and control."""

__version__ = "0.1.0"
