"""Crowd navigation with model predictive control and sampled pedestrian prediction."""

__version__ = "0.1.0"
