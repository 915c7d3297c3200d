"""Proof assistant for trace inclusion between fixed-point trace formulas."""

__version__ = "0.1.0"
