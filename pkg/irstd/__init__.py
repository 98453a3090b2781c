"""Infrared small target detection by low-rank and sparse tensor decomposition."""

__version__ = "0.1.0"
