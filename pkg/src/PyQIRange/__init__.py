"""
PyQIRange package

This package simulates and analyses entanglement-based quantum illumination and ranging.
It includes modules for configuration, polarization states, the optical link budget,
time-tag generation, coincidence analysis, CHSH estimation, exports and utilities.
"""

__version__ = "0.1.0"
