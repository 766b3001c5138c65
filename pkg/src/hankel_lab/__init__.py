"""Numerical experiments with ergodic Hankel operators.

Finite sections and their eigenvalue counts, Floquet-Bloch bands of periodic
models and Monte-Carlo diagnostics for the random Kronig-Penney-Hankel model.
"""

__version__ = "0.1.0"
