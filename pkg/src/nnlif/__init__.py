"""Numerical laboratory for the nonlinear noisy integrate-and-fire Fokker-Planck model."""

__version__ = "0.1.0"
