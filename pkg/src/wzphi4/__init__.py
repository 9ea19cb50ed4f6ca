"""Wong-Zakai approximation of the dynamical Phi^4 model: algebra, kernels, noise and solvers."""

__version__ = "0.1.0"
