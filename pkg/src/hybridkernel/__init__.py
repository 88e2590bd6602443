"""Convex hybrid modeling: kernel ridge regression around interpretable models,
simplex-constrained mixtures over parameterized families, and hybrid Koopman
generator identification with Lyapunov-based control.
"""

from . import control, errors, experiments, hybrid_static, kernels, koopman, linalg, simplex_qp, thermo_vle

__all__ = [
    "control",
    "errors",
    "experiments",
    "hybrid_static",
    "kernels",
    "koopman",
    "linalg",
    "simplex_qp",
    "thermo_vle",
]

__version__ = "0.1.0"
