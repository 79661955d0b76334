"""Compressive isogeometric analysis of the Poisson problem.

Trial functions come from a multilevel dictionary of interior B-splines on a
NURBS patch, test functions are tensor-product sines, and only a random
subset of the Petrov-Galerkin rows is assembled; the solution is recovered by
Orthogonal Matching Pursuit.
"""
__version__ = "0.1.0"

from .splines import KnotVector, Regularity, basis_matrix, eval_basis, make_open_uniform_knots
from .geometry import GeometryPatch, builtin_domain, load_patch, save_patch
from .quadrature import QuadratureSpec, default_quadrature
from .dictionary import TrialDictionary, build_dictionary, dict_cardinality
from .testspace import TestBasis, build_test_basis, choose_R
from .assembly import assemble_full, assemble_rows, scaling_matrix
from .coherence import draw_test_indices, nu_bound, sampling_distribution
from .recovery import SparseSolution, cossiga_solve, least_squares, omp
from .exact import get_exact
from .experiments import (
    Problem,
    calibrate_C,
    calibrate_D,
    convergence_study,
    h1_relative_error,
    run_method,
    summarize_runs,
)
