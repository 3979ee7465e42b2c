"""Perron-Volterra Lyapunov certificates for multi-strain epidemic models."""

__version__ = "0.1.0"
