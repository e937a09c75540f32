"""Quantum robot simulator."""
