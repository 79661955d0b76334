"""Error evaluation, reference solvers, calibration of the sparsity and
sampling constants, and convergence studies.

A :class:`Problem` bundles one discretization (case, degree, regularity,
levels) together with its dictionary, test basis and sampling density, and
caches the full Petrov-Galerkin system the first time a reference solver needs
it. Compressive runs either assemble their own matrix rows (the default) or,
with ``rows="full"``, read the same rows out of the cached full system; the two
agree to round-off and the latter is much cheaper when hundreds of runs share
one discretization. Load entries always come from a load vector computed once
per problem.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .assembly import PGSystem, assemble_full, assemble_load, assemble_rows_matrix, exact_quadrature, scaling_factors
from .coherence import SamplingDensity, draw_test_indices, run_seed, sampling_distribution
from .dictionary import TrialDictionary, build_dictionary
from .exact import CASE_DOMAINS, ExactSolution, get_exact
from .geometry import GeometryPatch, builtin_domain
from .quadrature import QuadratureSpec, default_quadrature, iter_chunks
from .recovery import SparseSolution, least_squares, omp, omp_path
from .splines import Regularity
from .testspace import TestBasis, build_test_basis, choose_R

__all__ = [
    "Problem",
    "RunRecord",
    "RunStatistics",
    "CalibrationResult",
    "h1_relative_error",
    "exact_seminorm",
    "run_method",
    "select_sparsity",
    "select_m",
    "fit_through_origin",
    "default_s_tested",
    "calibrate_C",
    "calibrate_D",
    "study_levels",
    "convergence_study",
    "summarize_runs",
    "PERCENTILES",
    "write_runs_csv",
    "write_summary_csv",
]

PERCENTILES = (2.7, 25.0, 50.0, 75.0, 99.3)
METHODS = ("pg-bs", "pg-omp", "cossiga")


# fine-grid error fields are kept in memory up to this many quadrature points
FIELD_CACHE_POINTS = 1 << 23


class InvalidExactSolution(ValueError):
    pass


def _grad_sq_sums(dic: TrialDictionary | None, coefs, g: GeometryPatch, exact: ExactSolution,
                  quad: QuadratureSpec):
    err = 0.0
    ref = 0.0
    for chunk in iter_chunks(g, quad):
        gu = exact.gradient(chunk.x)
        ref += float(np.sum(chunk.wdet * np.sum(gu**2, axis=-1)))
        if dic is not None:
            _, gh = dic.expansion_grid(coefs, chunk.axes)
            gu = gu - np.einsum("...ka,...k->...a", chunk.jinv, gh)
        err += float(np.sum(chunk.wdet * np.sum(gu**2, axis=-1)))
    return err, ref


def exact_seminorm(g: GeometryPatch, exact: ExactSolution, quad: QuadratureSpec) -> float:
    return math.sqrt(_grad_sq_sums(None, None, g, exact, quad)[1])


def h1_relative_error(solution, dic: TrialDictionary, g: GeometryPatch, exact: ExactSolution,
                      quad: QuadratureSpec | None = None) -> float:
    """``|u - u_h|_{H^1} / |u|_{H^1}`` for coefficients (or a :class:`SparseSolution`) over ``dic``."""
    coefs = solution.coefficients if isinstance(solution, SparseSolution) else np.asarray(solution, dtype=float)
    quad = quad or exact_quadrature(dic.p, dic.L, exact)
    err, ref = _grad_sq_sums(dic, coefs, g, exact, quad)
    if ref <= 0.0:
        raise InvalidExactSolution("exact solution has zero H1 seminorm")
    return math.sqrt(err / ref)


class Problem:
    """One discretization of one case, with lazily cached full system."""

    def __init__(self, case: str, p: int, regularity="Cmax", L: int = 5, l0: int = 1,
                 geometry: GeometryPatch | None = None, quad: QuadratureSpec | None = None,
                 rhs_quad: QuadratureSpec | None = None):
        self.case = case
        self.exact = get_exact(case)
        self.geometry = geometry or builtin_domain(CASE_DOMAINS[case])
        if self.geometry.dim != self.exact.dim:
            raise ValueError(f"case {case!r} is {self.exact.dim}D but the geometry is {self.geometry.dim}D")
        self.p = int(p)
        self.regularity = Regularity.parse(regularity)
        self.L = int(L)
        self.l0 = int(l0)
        self.quad = quad or default_quadrature(self.p, self.L)
        self.rhs_quad = rhs_quad or exact_quadrature(self.p, self.L, self.exact)
        self.dictionary = build_dictionary(self.p, self.regularity, self.l0, self.L, self.geometry, self.quad)
        self.R = choose_R(self.p, self.regularity, self.L)
        self.test_basis = build_test_basis(self.R, self.geometry, self.quad)
        self.density = sampling_distribution(self.R, self.L, self.geometry.dim)
        self._system: PGSystem | None = None
        self._bs: tuple | None = None
        self._omp_path = None
        self._omp_exhausted = False
        self._load: np.ndarray | None = None
        self._fields: list | None = None
        self._ref_sq: float | None = None

    @property
    def N_dof(self) -> int:
        return self.dictionary.N_dof

    @property
    def N_dict(self) -> int:
        return self.dictionary.N_dict

    @property
    def N_test(self) -> int:
        return self.test_basis.N_test

    @property
    def system(self) -> PGSystem:
        if self._system is None:
            self._system = assemble_full(self.dictionary, self.test_basis, self.geometry, self.quad,
                                         self.exact, self.rhs_quad)
        return self._system

    @property
    def load(self) -> np.ndarray:
        """Full normalized load vector (shared by every compressive run)."""
        if self._load is None:
            if self._system is not None:
                self._load = self._system.c
            else:
                self._load = assemble_load(self.test_basis, self.geometry, self.rhs_quad, self.exact)
        return self._load

    def _error_fields(self):
        # sqrt(w |det J|) J^{-T} and sqrt(w |det J|) grad u per chunk, so that
        # the squared error is a plain sum of squares
        if self._fields is None:
            fields_, ref = [], 0.0
            for chunk in iter_chunks(self.geometry, self.rhs_quad):
                sw = np.sqrt(chunk.wdet)
                P = sw[..., None, None] * np.swapaxes(chunk.jinv, -1, -2)
                v = sw[..., None] * self.exact.gradient(chunk.x)
                ref += float(np.sum(v**2))
                fields_.append((chunk.axes, P, v))
            if ref <= 0.0:
                raise InvalidExactSolution("exact solution has zero H1 seminorm")
            self._fields, self._ref_sq = fields_, ref
        return self._fields

    def error(self, solution) -> float:
        """Relative H1 error; same rule as :func:`h1_relative_error`, with the exact-solution data cached."""
        npts = self.rhs_quad.points_per_direction ** self.geometry.dim
        if npts > FIELD_CACHE_POINTS:
            return h1_relative_error(solution, self.dictionary, self.geometry, self.exact, self.rhs_quad)
        coefs = solution.coefficients if isinstance(solution, SparseSolution) else np.asarray(solution, dtype=float)
        err = 0.0
        for axes, P, v in self._error_fields():
            _, gh = self.dictionary.expansion_grid(coefs, axes)
            err += float(np.sum((np.einsum("...ab,...b->...a", P, gh) - v) ** 2))
        return math.sqrt(err / self._ref_sq)

    def pg_bs(self):
        """Least-squares solution of the full system and its error (cached)."""
        if self._bs is None:
            z, res = least_squares(self.system.B, self.system.c)
            sol = SparseSolution(z, list(np.flatnonzero(z)), self.N_dict, res, [res], "pg-bs")
            self._bs = (sol, self.error(sol))
        return self._bs

    def pg_omp_path(self, s: int):
        if self._omp_path is None or (len(self._omp_path) < s and not self._omp_exhausted):
            self._omp_path = omp_path(self.system.B, self.system.c, min(s, self.N_dict))
            self._omp_exhausted = len(self._omp_path) < min(s, self.N_dict)
        return self._omp_path

    def pg_omp(self, s: int):
        sol = self.pg_omp_path(s).solution(s, "pg-omp")
        sol.s = min(int(s), self.N_dict)
        return sol, self.error(sol)

    def cossiga(self, s: int, m: int, seed: int, rows: str = "assemble"):
        """One compressive run; ``rows="full"`` reads the sampled rows from the cached system."""
        if rows not in ("assemble", "full"):
            raise ValueError(f"rows must be 'assemble' or 'full', got {rows!r}")
        tau = draw_test_indices(self.density, m, seed)
        if rows == "assemble":
            A = assemble_rows_matrix(self.dictionary, self.test_basis, self.geometry, self.quad, tau)
        else:
            A = self.system.B[tau]
        b = self.load[tau]
        e = scaling_factors(self.density.pi, tau)
        sol = omp(e[:, None] * A, e * b, s)
        sol.method, sol.m, sol.seed = "cossiga", int(m), int(seed)
        return sol, self.error(sol)


def run_method(method: str, problem: Problem, s: int | None = None, m: int | None = None,
               seed: int | None = None, rows: str = "assemble"):
    """Solve with one of ``pg-bs``, ``pg-omp``, ``cossiga``; returns ``(solution, relative H1 error)``."""
    method = method.replace("_", "-").lower()
    if method == "pg-bs":
        return problem.pg_bs()
    if method == "pg-omp":
        if s is None:
            raise ValueError("pg-omp needs s")
        return problem.pg_omp(s)
    if method == "cossiga":
        if s is None or m is None or seed is None:
            raise ValueError("cossiga needs s, m and seed")
        return problem.cossiga(s, m, seed, rows)
    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")


@dataclass
class RunRecord:
    run_id: int
    seed: int | None
    method: str
    case: str
    p: int
    regularity: str
    l0: int
    L: int
    s: int
    m: int | None
    n_comp: int
    subsampling_rate: float | None
    h1_rel_err: float


@dataclass
class RunStatistics:
    errors: np.ndarray = field(repr=False)
    percentiles: dict
    outliers: list
    subsampling_rate: float | None = None

    @property
    def median(self) -> float:
        return self.percentiles[50.0]


def summarize_runs(errors, subsampling_rate: float | None = None) -> RunStatistics:
    """Box-plot statistics: percentiles 2.7/25/50/75/99.3 (linear interpolation),
    outliers are values outside the whisker percentiles."""
    e = np.asarray(errors, dtype=float).reshape(-1)
    if e.size == 0:
        raise ValueError("no errors to summarize")
    pct = np.percentile(e, PERCENTILES, method="linear")
    lo, hi = pct[0], pct[-1]
    outliers = [float(x) for x in e if x < lo or x > hi]
    return RunStatistics(e, {p: float(v) for p, v in zip(PERCENTILES, pct)}, outliers, subsampling_rate)


def select_sparsity(candidates, errors, target: float):
    """Candidate whose error is closest to ``target``; ties go to the smallest candidate."""
    cand = np.asarray(candidates)
    err = np.asarray(errors, dtype=float)
    if cand.size == 0:
        raise ValueError("no candidates")
    order = np.argsort(cand, kind="stable")
    gap = np.abs(err[order] - target)
    return cand[order][int(np.argmin(gap))].item()


select_m = select_sparsity


def fit_through_origin(x, y) -> float:
    """Least-squares slope of ``y = D x`` without intercept."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size == 0:
        raise ValueError("no data to fit")
    return float(x @ y / (x @ x))


def default_s_tested() -> list:
    """``ceil(2 .^ (2:0.25:11))``, duplicates removed."""
    exps = np.arange(2.0, 11.0 + 1e-12, 0.25)
    return sorted({int(math.ceil(2.0**e - 1e-9)) for e in exps})


@dataclass
class CalibrationResult:
    kind: str
    value: float
    mu_factor: float
    tested: list
    errors: list
    reference: dict
    picks: list = field(default_factory=list)

    @property
    def C(self) -> float:
        if self.kind != "C":
            raise AttributeError("not a C calibration")
        return self.value

    @property
    def D(self) -> float:
        if self.kind != "D":
            raise AttributeError("not a D calibration")
        return self.value


def calibrate_C(case: str, p: int, regularity="Cmax", L: int = 5, mu_factor: float = 2.0,
                S_tested=None, l0: int = 1, problem: Problem | None = None) -> CalibrationResult:
    """Sparsity constant from the PG-OMP error curve against ``mu_factor`` times the PG-BS error."""
    if mu_factor <= 1.0:
        raise ValueError("mu_factor must exceed 1")
    S = default_s_tested() if S_tested is None else sorted({int(s) for s in S_tested})
    if not S:
        raise ValueError("empty S_tested")
    prob = problem or Problem(case, p, regularity, L, l0)
    S = sorted({min(s, prob.N_dict) for s in S})
    _, err_bs = prob.pg_bs()
    prob.pg_omp_path(max(S))
    errs = [prob.pg_omp(s)[1] for s in S]
    s_star = select_sparsity(S, errs, mu_factor * err_bs)
    return CalibrationResult("C", s_star / prob.N_dof, mu_factor, S, errs,
                             {"pg_bs": err_bs, "s_star": s_star, "N_dof": prob.N_dof})


def default_m_grid(s: int, n_dof: int, points: int = 16) -> list:
    grid = np.unique(np.ceil(np.geomspace(s, n_dof, points)).astype(int))
    return [int(m) for m in grid if s <= m <= n_dof]


def _cossiga_medians(prob: Problem, s, m_values, n_runs, base_seed, rows, jobs):
    def one(args):
        m, run = args
        return prob.cossiga(s, m, run_seed(base_seed, run), rows)[1]

    tasks = [(m, run) for m in m_values for run in range(n_runs)]
    if jobs and jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            errs = list(ex.map(one, tasks))
    else:
        errs = [one(t) for t in tasks]
    errs = np.asarray(errs).reshape(len(m_values), n_runs)
    return np.median(errs, axis=1), errs


def calibrate_D(case: str, p: int, regularity="Cmax", L: int = 5, mu_factor: float = 2.0,
                s_values=None, m_grid=None, n_runs: int = 25, base_seed: int = 0, *, C: float | None = None,
                l0: int = 1, problem: Problem | None = None, rows: str = "full",
                jobs: int = 1) -> CalibrationResult:
    """Sampling constant from the elbow of the median compressive error curve.

    For every ``s`` the chosen ``m*`` minimizes the gap between the median
    error over ``n_runs`` runs and ``mu_factor`` times the PG-OMP(s) error;
    ``D`` is the through-origin least-squares slope of ``(s, m*)``. Without
    ``s_values``, about five sparsities between 2 and ``C * N_dof`` are used.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    prob = problem or Problem(case, p, regularity, L, l0)
    if s_values is None:
        if C is None:
            raise ValueError("give s_values or the sparsity constant C")
        s_top = max(2, int(round(C * prob.N_dof)))
        s_values = sorted({int(round(x)) for x in np.geomspace(2, s_top, 5)})
    s_values = [int(s) for s in s_values]
    if not s_values:
        raise ValueError("empty s grid")
    picks, curves = [], []
    prob.pg_omp_path(max(s_values))
    for s in s_values:
        grid = default_m_grid(s, prob.N_dof) if m_grid is None else [int(m) for m in m_grid if s <= m <= prob.N_dof]
        if not grid:
            raise ValueError(f"empty m grid for s={s}")
        err_omp = prob.pg_omp(s)[1]
        med, errs = _cossiga_medians(prob, s, grid, n_runs, base_seed, rows, jobs)
        m_star = select_m(grid, med, mu_factor * err_omp)
        picks.append((s, m_star))
        curves.append({"s": s, "m": grid, "median": med.tolist(), "pg_omp": err_omp, "errors": errs.tolist()})
    D = fit_through_origin([s for s, _ in picks], [m for _, m in picks])
    return CalibrationResult("D", D, mu_factor, s_values, curves, {"pg_bs": prob.pg_bs()[1], "N_dof": prob.N_dof},
                             picks)


def study_levels(C: float, D: float, N_dof: int, lam: float = 1.0, cap: float = 0.8):
    """``(s, m)`` from the linear models with safety factor ``lam`` and the subsampling cap."""
    if lam < 1.0:
        raise ValueError("lambda must be >= 1")
    s = max(1, int(math.floor(lam * C * N_dof + 0.5)))
    rate = min(lam**2 * C * D, cap)
    m = max(s, int(math.floor(rate * N_dof + 0.5)))
    return s, m


def convergence_study(case: str, p: int, regularity="Cmax", l0: int = 1, L_values=(4, 5, 6),
                      lam: float = 1.0, C: float = 1.6e-2, D=6.38, n_runs: int = 25, base_seed: int = 0,
                      rows: str = "assemble", jobs: int = 1, cap: float = 0.8,
                      geometry: GeometryPatch | None = None):
    """PG-BS, PG-OMP(s) and ``n_runs`` compressive runs for each level.

    ``D`` may be a number or a mapping ``L -> D(L)``. Returns
    ``(records, stats)`` where ``stats[L]`` summarizes the compressive errors.
    """
    records: list[RunRecord] = []
    stats: dict = {}
    run_id = 0
    for L in L_values:
        prob = Problem(case, p, regularity, L, l0, geometry)
        D_L = D[L] if isinstance(D, dict) else float(D)
        s, m = study_levels(C, D_L, prob.N_dof, lam, cap)
        rate = m / prob.N_dof
        common = dict(case=case, p=p, regularity=prob.regularity.value, l0=l0, L=L)
        bs, e_bs = prob.pg_bs()
        records.append(RunRecord(run_id, None, "pg-bs", s=prob.N_dict, m=None, n_comp=prob.N_dict,
                                 subsampling_rate=None, h1_rel_err=e_bs, **common))
        run_id += 1
        _, e_omp = prob.pg_omp(s)
        records.append(RunRecord(run_id, None, "pg-omp", s=s, m=None, n_comp=s, subsampling_rate=None,
                                 h1_rel_err=e_omp, **common))
        run_id += 1
        _, errs = _cossiga_medians(prob, s, [m], n_runs, base_seed, rows, jobs)
        for run, e in enumerate(errs[0]):
            records.append(RunRecord(run_id, run_seed(base_seed, run), "cossiga", s=s, m=m, n_comp=s,
                                     subsampling_rate=rate, h1_rel_err=float(e), **common))
            run_id += 1
        stats[L] = summarize_runs(errs[0], rate)
    return records, stats


RUNS_HEADER = ["run_id", "seed", "method", "case", "p", "regularity", "l0", "L", "s", "m", "n_comp",
               "subsampling_rate", "h1_rel_err"]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_runs_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RUNS_HEADER)
        for rec in records:
            row = asdict(rec)
            w.writerow([_fmt(row[k]) for k in RUNS_HEADER])


def write_summary_csv(rows, path) -> None:
    """``rows``: iterable of ``(config dict, RunStatistics)``."""
    rows = list(rows)
    keys = list(rows[0][0]) if rows else []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys + [f"p{p:g}" for p in PERCENTILES] + ["n_outliers", "subsampling_rate"])
        for cfg, st in rows:
            w.writerow([_fmt(cfg[k]) for k in keys] + [repr(st.percentiles[p]) for p in PERCENTILES]
                       + [len(st.outliers), _fmt(st.subsampling_rate)])
