"""Spectral toolkit for line solitary waves of the 2D Zakharov-Kuznetsov flow."""

__version__ = "0.1.0"
