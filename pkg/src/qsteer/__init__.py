"""Quantum steering analysis built on a small dense SDP engine."""
__version__ = "0.1.0"
