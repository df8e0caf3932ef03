"""Constraint-based kinematics for constrained collaborative mobile agents."""

__version__ = "0.1.0"
