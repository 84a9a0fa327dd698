"""Minimal-width compilation of measurement-terminated quantum instruments.

The package determines how few simultaneously-live qubits suffice to realize
a syndrome-measurement instrument when mid-circuit measurement, qubit reuse
and delayed input loading are allowed, synthesizes a circuit attaining that
width, and verifies it by exact simulation.
"""

__version__ = "0.1.0"
