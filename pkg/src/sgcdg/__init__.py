"""Sparse grid central discontinuous Galerkin methods for linear hyperbolic systems.

Modules:
    basis1d          Legendre polynomials, Gauss rules, Alpert multiwavelets
    hierarchy1d      1D primal/dual hierarchical spaces and coupling matrices
    sparse_space     sparse multi-index sets and DoF numbering
    fast_transform   level-restricted LU splits and unidirectional application
    projection       L2 projection, evaluation, errors
    cdg_operator     semi-discrete CDG right-hand side
    time_integration TVD Runge-Kutta stepping
    cfl_analysis     eigenvalue-based CFL numbers
    problems         benchmark problem catalogue
    cli              batch driver
"""

__version__ = "0.1.0"
