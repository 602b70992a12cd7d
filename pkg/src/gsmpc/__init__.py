"""Gaussian-splat visual dynamics and model-predictive control for pushing
granular piles."""

__version__ = "0.1.0"
