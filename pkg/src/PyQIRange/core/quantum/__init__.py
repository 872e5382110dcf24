"""
Quantum Submodule

Two-qubit polarization states, analyzer settings and exact measurement statistics.
"""
