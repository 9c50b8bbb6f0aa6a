"""Numerical estimators for approximate tangent cones, higher-order jets and
second fundamental forms of sets, with a deterministic fixture catalog."""

__version__ = "0.1.0"
