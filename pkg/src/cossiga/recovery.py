"""Sparse recovery by Orthogonal Matching Pursuit, and least squares.

:func:`cossiga_solve` runs the whole compressive pipeline: pick the test
frequency cap, draw test indices from the coherence-based density, assemble
only those rows, and run ``s`` OMP iterations on the rescaled system.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .assembly import assemble_rows, exact_quadrature
from .coherence import draw_test_indices, sampling_distribution
from .dictionary import TrialDictionary, build_dictionary
from .exact import ExactSolution
from .geometry import GeometryPatch
from .quadrature import QuadratureSpec, default_quadrature
from .testspace import TestBasis, build_test_basis, choose_R

__all__ = [
    "SparseSolution",
    "OMPPath",
    "omp",
    "omp_path",
    "least_squares",
    "cossiga_solve",
    "export_solution_csv",
]

# relative decrease of the residual norm below which OMP stops
STAGNATION = 1e-14


@dataclass
class SparseSolution:
    """Coefficients over the dictionary with the selected support in selection order."""

    coefficients: np.ndarray = field(repr=False)
    support: list
    s: int
    residual_norm: float
    residual_trace: list = field(default_factory=list, repr=False)
    method: str = "omp"
    m: int | None = None
    seed: int | None = None
    capped: bool = False

    @property
    def n_comp(self) -> int:
        """Number of computed coefficients."""
        if self.method == "pg-bs":
            return int(self.coefficients.size)
        return self.s


class OMPPath:
    """Greedy selection history of one OMP run.

    The first ``k`` selections of a longer run are exactly the run with ``k``
    iterations, so one path serves every sparsity up to its length.
    """

    def __init__(self, n_cols, support, R, qty, trace, capped=False):
        self.n_cols = n_cols
        self.support = list(support)
        self.R = R
        self.qty = qty
        self.trace = list(trace)
        self.capped = capped

    def __len__(self):
        return len(self.support)

    def solution(self, s: int, method: str = "omp") -> SparseSolution:
        k = min(int(s), len(self.support))
        z = np.zeros(self.n_cols)
        if k:
            z[self.support[:k]] = scipy.linalg.solve_triangular(self.R[:k, :k], self.qty[:k])
        return SparseSolution(z, self.support[:k], int(s), float(self.trace[k]),
                              self.trace[: k + 1], method, capped=self.capped)


def omp_path(M, y, s: int, tol: float | None = None) -> OMPPath:
    """Run up to ``s`` OMP iterations and keep the factorization history.

    Columns are selected by absolute correlation with the residual after
    normalizing each column (ties go to the lowest index); the projection on
    the active columns is maintained as an incremental QR factorization with
    one step of reorthogonalization. Iteration stops early when the residual
    drops below ``tol`` (default ``1e-12 * ||y||``), when it stagnates, or when
    no admissible column is left.
    """
    M = np.asarray(M, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if M.ndim != 2 or M.shape[0] != y.size:
        raise ValueError(f"dimension mismatch: matrix {M.shape}, vector {y.shape}")
    if M.shape[1] < 1:
        raise ValueError("matrix has no columns")
    if s < 1:
        raise ValueError("sparsity must be >= 1")
    n_rows, n_cols = M.shape
    capped = False
    if s > n_cols:
        warnings.warn(f"sparsity {s} exceeds the {n_cols} columns; capping", RuntimeWarning, stacklevel=2)
        s, capped = n_cols, True
    ynorm = float(np.linalg.norm(y))
    tol = 1e-12 * ynorm if tol is None else float(tol)
    norms = np.linalg.norm(M, axis=0)
    usable = norms > 0.0
    inv_norms = np.where(usable, 1.0 / np.where(usable, norms, 1.0), 0.0)

    Q = np.zeros((n_rows, s))
    R = np.zeros((s, s))
    qty = np.zeros(s)
    support: list[int] = []
    resid = y.copy()
    trace = [ynorm]
    k = 0
    while k < s and trace[-1] > tol:
        corr = np.abs(M.T @ resid) * inv_norms
        corr[~usable] = -1.0
        j = int(np.argmax(corr))
        if corr[j] <= 0.0:
            break
        v = M[:, j]
        h = Q[:, :k].T @ v
        w = v - Q[:, :k] @ h
        h2 = Q[:, :k].T @ w
        w -= Q[:, :k] @ h2
        h += h2
        nw = np.linalg.norm(w)
        usable[j] = False
        if nw <= 1e-12 * norms[j]:
            # numerically inside the current span; never selectable again
            continue
        qk = w / nw
        Q[:, k] = qk
        R[:k, k] = h
        R[k, k] = nw
        qty[k] = qk @ y
        resid = resid - (qk @ resid) * qk
        support.append(j)
        k += 1
        rn = float(np.linalg.norm(resid))
        prev = trace[-1]
        trace.append(rn)
        if prev - rn < STAGNATION * prev:
            break
    return OMPPath(n_cols, support, R[:k, :k], qty[:k], trace, capped)


def omp(M, y, s: int, tol: float | None = None) -> SparseSolution:
    """``s`` iterations of Orthogonal Matching Pursuit for ``M z ~ y``."""
    path = omp_path(M, y, s, tol)
    sol = path.solution(len(path))
    sol.s = min(int(s), path.n_cols)
    return sol


def least_squares(M, y, rcond: float = 1e-12):
    """Minimum-norm least-squares solution and residual norm.

    Uses LAPACK's complete orthogonal factorization with column pivoting
    (``gelsy``), which discards directions below ``rcond`` relative to the
    largest pivot.
    """
    M = np.asarray(M, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if M.ndim != 2 or M.shape[0] != y.size:
        raise ValueError(f"dimension mismatch: matrix {M.shape}, vector {y.shape}")
    z, _, _, _ = scipy.linalg.lstsq(M, y, cond=rcond, lapack_driver="gelsy")
    return z, float(np.linalg.norm(M @ z - y))


def cossiga_solve(p: int, regularity, L: int, s: int, m: int, l0: int, g: GeometryPatch,
                  exact: ExactSolution, seed: int, *, dictionary: TrialDictionary | None = None,
                  test_basis: TestBasis | None = None, quad: QuadratureSpec | None = None,
                  rhs_quad: QuadratureSpec | None = None) -> SparseSolution:
    """Compressive solve with ``m`` sampled test functions and ``s`` OMP iterations.

    Prebuilt ``dictionary``/``test_basis`` may be passed to avoid rebuilding
    them across runs; they must match the other arguments.
    """
    if m < 1 or s < 1:
        raise ValueError("need m >= 1 and s >= 1")
    if s > m:
        warnings.warn("s > m: at most m coefficients are identifiable", RuntimeWarning, stacklevel=2)
    quad = quad or default_quadrature(p, L)
    dic = dictionary or build_dictionary(p, regularity, l0, L, g, quad)
    R = choose_R(p, regularity, L)
    tb = test_basis or build_test_basis(R, g, quad)
    if tb.R != R or dic.L != L or dic.p != p:
        raise ValueError("prebuilt dictionary or test basis does not match the parameters")
    density = sampling_distribution(R, L, g.dim)
    tau = draw_test_indices(density, m, seed)
    sub = assemble_rows(dic, tb, g, quad, exact, tau, density.pi,
                        rhs_quad or exact_quadrature(p, L, exact))
    sol = omp(sub.e[:, None] * sub.A, sub.e * sub.b, s)
    sol.method, sol.m, sol.seed = "cossiga", int(m), int(seed)
    return sol


def export_solution_csv(sol: SparseSolution, dic: TrialDictionary, path) -> None:
    """Nonzero coefficients as ``j, level, i_1..i_d, coefficient`` in index order."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "level"] + [f"i{k + 1}" for k in range(dic.dim)] + ["coefficient"])
        for j in np.flatnonzero(sol.coefficients):
            w.writerow([int(j), int(dic.atom_level[j])] + [int(i) for i in dic.atom_index[j]]
                       + [repr(float(sol.coefficients[j]))])
