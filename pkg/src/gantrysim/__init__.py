"""Deterministic simulation and analysis toolkit for a 6-DoF Cartesian gantry manipulator."""

__version__ = "0.1.0"
