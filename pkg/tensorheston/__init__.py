"""
tensorheston package.

Simulation and analytics for the tensor Heston stochastic volatility model on a
truncated Hilbert space: the Gaussian OU driver Y, the variance V = Y (x) Y, the
volatility-modulated OU process X, and forward curves in the Filipovic space.
"""

__version__ = "0.1.0"
