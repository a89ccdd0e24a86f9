"""Bit-exact laboratory for floating-point soundness gaps in neural network verifiers."""

__version__ = "0.1.0"
