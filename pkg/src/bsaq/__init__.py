"""Sequential Bayesian root finding for binary-response experiments."""

__version__ = "0.1.0"
