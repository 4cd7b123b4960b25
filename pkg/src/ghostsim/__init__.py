"""Correlated-photon (ghost) imaging with Fourier-plane aberration cancellation."""

__version__ = "0.1.0"
