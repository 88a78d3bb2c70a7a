"""Lie group representation detection in point clouds."""

__version__ = "0.1.0"
