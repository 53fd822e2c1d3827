"""Planar cable-robot simulator with a brake-and-swing energy-saving controller."""

__version__ = "0.1.0"
