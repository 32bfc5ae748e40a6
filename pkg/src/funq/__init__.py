"""Asymptotically optimal functional quantization of Gaussian processes."""

__version__ = "0.1.0"
