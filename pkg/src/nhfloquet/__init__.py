"""Density-matrix simulation of an anomalous Floquet-Anderson insulator with ancilla-driven correction."""

__version__ = "0.1.0"
