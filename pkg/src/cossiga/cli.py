"""Command-line front end.

Every command reads an optional JSON config, lets flags override it, writes
the effective config next to its outputs and is a pure function of
``(config, flags, seed)`` apart from the ``metadata`` field of that file.

Examples
--------
    cossiga dict-info --config cfg.json
    cossiga solve --method cossiga --seed 3 --out run1
    cossiga reproduce fig4 --out fig4
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .assembly import assemble_rows, export_matrix, export_vector
from .coherence import draw_test_indices, export_density_csv, sampling_distribution
from .dictionary import dict_cardinality, level_cardinality
from .exact import CASE_DOMAINS, EXACT_SOLUTIONS
from .experiments import (
    Problem,
    RunRecord,
    calibrate_C,
    calibrate_D,
    convergence_study,
    run_method,
    study_levels,
    summarize_runs,
    write_runs_csv,
    write_summary_csv,
)
from .geometry import BUILTIN_DOMAINS, builtin_domain, load_patch
from .quadrature import QuadratureSpec
from .recovery import export_solution_csv
from .splines import Regularity
from .testspace import choose_R

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "cossiga experiment config",
    "type": "object",
    "properties": {
        "case": {"enum": sorted(EXACT_SOLUTIONS)},
        "p": {"type": "integer", "minimum": 1},
        "regularity": {"enum": ["Cmax", "C0"]},
        "l0": {"type": "integer", "minimum": 1},
        "L": {"type": "integer", "minimum": 2},
        "s": {"type": ["integer", "null"], "minimum": 1},
        "m": {"type": ["integer", "null"], "minimum": 1},
        "C": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "D": {"type": ["number", "object", "null"]},
        "lambda": {"type": "number", "minimum": 1},
        "mu_factor": {"type": "number", "exclusiveMinimum": 1},
        "quadrature_points": {"type": ["integer", "null"], "minimum": 1},
        "n_runs": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "method": {"enum": ["cossiga", "pg-omp", "pg-bs"]},
        "L_values": {"type": "array", "items": {"type": "integer"}},
        "S_tested": {"type": ["array", "null"], "items": {"type": "integer"}},
        "s_values": {"type": ["array", "null"], "items": {"type": "integer"}},
        "m_grid": {"type": ["array", "null"], "items": {"type": "integer"}},
        "rows": {"enum": ["assemble", "full"]},
        "geometry": {"type": ["string", "null"]},
        "output_dir": {"type": "string"},
        "metadata": {"type": "object"},
    },
    "additionalProperties": False,
}


@dataclass
class ExperimentConfig:
    case: str = "polygauss2d"
    p: int = 2
    regularity: str = "Cmax"
    l0: int = 1
    L: int = 5
    s: int | None = None
    m: int | None = None
    C: float | None = None
    D: float | dict | None = None
    lam: float = 1.0
    mu_factor: float = 2.0
    quadrature_points: int | None = None
    n_runs: int = 25
    seed: int = 0
    method: str = "cossiga"
    L_values: list = field(default_factory=lambda: [4, 5, 6])
    S_tested: list | None = None
    s_values: list | None = None
    m_grid: list | None = None
    rows: str = "assemble"
    geometry: str | None = None
    output_dir: str = "out"

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = {k: v for k, v in data.items() if k != "metadata"}
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        if isinstance(cfg.D, dict):
            cfg.D = {int(k): float(v) for k, v in cfg.D.items()}
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        if isinstance(self.D, dict):
            d["D"] = {str(k): v for k, v in self.D.items()}
        return d

    def validate(self) -> None:
        if self.case not in EXACT_SOLUTIONS:
            raise ValueError(f"unknown case {self.case!r}")
        if self.case not in CASE_DOMAINS:
            raise ValueError(f"no geometry for case {self.case!r}")
        Regularity.parse(self.regularity)
        self.regularity = Regularity.parse(self.regularity).value
        self.method = self.method.replace("_", "-")
        if self.method not in ("cossiga", "pg-omp", "pg-bs"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.p < 1 or self.l0 < 1 or self.L <= self.l0:
            raise ValueError("need p >= 1 and 1 <= l0 < L")
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        if self.lam < 1:
            raise ValueError("lambda must be >= 1")
        if self.mu_factor <= 1:
            raise ValueError("mu_factor must exceed 1")
        if self.rows not in ("assemble", "full"):
            raise ValueError("rows must be 'assemble' or 'full'")
        for name in ("s", "m"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def dim(self) -> int:
        return EXACT_SOLUTIONS[self.case].dim

    def D_at(self, L: int) -> float | None:
        if isinstance(self.D, dict):
            return self.D.get(L)
        return self.D

    def sparsity_and_samples(self, n_dof: int) -> tuple[int, int]:
        """``(s, m)`` from the config, falling back to the linear models."""
        s, m = self.s, self.m
        if s is None or m is None:
            D = self.D_at(self.L)
            if self.C is None or D is None:
                raise ValueError("give s and m, or the constants C and D")
            s_mod, m_mod = study_levels(self.C, D, n_dof, self.lam)
            s = s if s is not None else s_mod
            m = m if m is not None else m_mod
        return s, m


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return ExperimentConfig.from_dict(json.load(fh))


def write_config(cfg: ExperimentConfig, out: Path, command: str) -> None:
    data = cfg.to_dict()
    data["metadata"] = {"command": command, "version": __version__,
                        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z")}
    with open(out / "config.json", "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _quad(cfg: ExperimentConfig, L: int | None = None) -> QuadratureSpec | None:
    if cfg.quadrature_points is None:
        return None
    return QuadratureSpec(cfg.quadrature_points, cfg.L if L is None else L)


def _geometry(cfg: ExperimentConfig):
    """Builtin domain name or path to a patch JSON; defaults to the case's domain."""
    if cfg.geometry is None:
        return builtin_domain(CASE_DOMAINS[cfg.case])
    if cfg.geometry in BUILTIN_DOMAINS:
        return builtin_domain(cfg.geometry)
    path = Path(cfg.geometry)
    if not path.is_file():
        raise ValueError(f"geometry {cfg.geometry!r} is neither a builtin domain nor a file")
    return load_patch(path)


def _problem(cfg: ExperimentConfig, L: int | None = None) -> Problem:
    L = cfg.L if L is None else L
    return Problem(cfg.case, cfg.p, cfg.regularity, L, cfg.l0, geometry=_geometry(cfg), quad=_quad(cfg, L))


def _write_json(path: Path, data) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------- commands

def cmd_dict_info(cfg: ExperimentConfig, args) -> dict:
    reg = Regularity.parse(cfg.regularity)
    n_dict, n_dof = dict_cardinality(cfg.p, reg, cfg.l0, cfg.L, cfg.dim)
    R = choose_R(cfg.p, reg, cfg.L)
    report = {
        "case": cfg.case, "dim": cfg.dim, "p": cfg.p, "regularity": reg.value, "l0": cfg.l0, "L": cfg.L,
        "N_dict": n_dict, "N_dof": n_dof,
        "per_level": {str(l): level_cardinality(cfg.p, reg, l, cfg.dim) for l in range(cfg.l0, cfg.L + 1)},
        "R": R, "N_test": R**cfg.dim,
    }
    print(json.dumps(report, indent=2))
    if args.out:
        _write_json(Path(args.out) / "dict_info.json", report)
    return report


def _record(run_id, prob: Problem, sol, err, cfg, method, s, m, seed) -> RunRecord:
    return RunRecord(run_id, seed if method == "cossiga" else None, method, cfg.case, cfg.p,
                     prob.regularity.value, cfg.l0, prob.L, s if method != "pg-bs" else prob.N_dict,
                     m if method == "cossiga" else None, sol.n_comp,
                     m / prob.N_dof if method == "cossiga" else None, err)


def cmd_solve(cfg: ExperimentConfig, args) -> dict:
    out = Path(args.out)
    prob = _problem(cfg)
    method = cfg.method
    s = m = None
    if method != "pg-bs":
        if cfg.s is None and method == "pg-omp" and cfg.C is not None:
            s = study_levels(cfg.C, 1.0, prob.N_dof, cfg.lam)[0]
        elif method == "pg-omp" and cfg.s is not None:
            s = cfg.s
        else:
            s, m = cfg.sparsity_and_samples(prob.N_dof)
    if method == "pg-omp" and s is None:
        raise ValueError("pg-omp needs s or C")
    sol, err = run_method(method, prob, s, m, cfg.seed, cfg.rows)
    export_solution_csv(sol, prob.dictionary, out / "solution.csv")
    rec = _record(0, prob, sol, err, cfg, method, s, m, cfg.seed)
    write_runs_csv([rec], out / "runs.csv")
    if args.dump_matrices:
        if method == "cossiga":
            tau = draw_test_indices(prob.density, m, cfg.seed)
            sub = assemble_rows(prob.dictionary, prob.test_basis, prob.geometry, prob.quad, prob.exact,
                                tau, prob.density.pi, prob.rhs_quad)
            export_matrix(sub.A, out / "A.mtx")
            export_vector(sub.b, out / "b.csv")
            export_vector(sub.e, out / "E_diag.csv")
            with open(out / "tau.csv", "w") as fh:
                fh.write("i,q\n")
                fh.writelines(f"{i},{int(q)}\n" for i, q in enumerate(sub.tau))
        else:
            export_matrix(prob.system.B, out / "B.mtx")
            export_vector(prob.system.c, out / "c.csv")
    report = {"method": method, "h1_rel_err": err, "n_comp": sol.n_comp, "s": rec.s, "m": m,
              "N_dof": prob.N_dof, "N_dict": prob.N_dict}
    print(json.dumps(report, indent=2))
    return report


def cmd_calibrate_c(cfg: ExperimentConfig, args) -> dict:
    out = Path(args.out)
    prob = _problem(cfg)
    res = calibrate_C(cfg.case, cfg.p, cfg.regularity, cfg.L, cfg.mu_factor, cfg.S_tested, cfg.l0, problem=prob)
    with open(out / "calibration_c.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "s_over_N_dof", "h1_rel_err_pg_omp", "target"])
        target = cfg.mu_factor * res.reference["pg_bs"]
        for s, e in zip(res.tested, res.errors):
            w.writerow([s, repr(s / prob.N_dof), repr(e), repr(target)])
    report = {"C": res.C, "s_star": res.reference["s_star"], "pg_bs": res.reference["pg_bs"],
              "N_dof": prob.N_dof, "mu_factor": cfg.mu_factor}
    _write_json(out / "calibration_c.json", report)
    print(json.dumps(report, indent=2))
    return report


def cmd_calibrate_d(cfg: ExperimentConfig, args) -> dict:
    out = Path(args.out)
    prob = _problem(cfg)
    res = calibrate_D(cfg.case, cfg.p, cfg.regularity, cfg.L, cfg.mu_factor, cfg.s_values, cfg.m_grid,
                      cfg.n_runs, cfg.seed, C=cfg.C, l0=cfg.l0, problem=prob, rows=cfg.rows, jobs=args.jobs)
    with open(out / "calibration_d_runs.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "m", "run", "seed", "h1_rel_err", "pg_omp", "target"])
        for curve in res.errors:
            target = cfg.mu_factor * curve["pg_omp"]
            for m, errs in zip(curve["m"], curve["errors"]):
                for run, e in enumerate(errs):
                    w.writerow([curve["s"], m, run, cfg.seed + run, repr(e), repr(curve["pg_omp"]), repr(target)])
    with open(out / "calibration_d_summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "m", "median"])
        for curve in res.errors:
            for m, med in zip(curve["m"], curve["median"]):
                w.writerow([curve["s"], m, repr(med)])
    report = {"D": res.D, "pairs": [list(p) for p in res.picks], "N_dof": prob.N_dof,
              "mu_factor": cfg.mu_factor, "n_runs": cfg.n_runs}
    _write_json(out / "calibration_d.json", report)
    print(json.dumps(report, indent=2))
    return report


def cmd_converge(cfg: ExperimentConfig, args) -> dict:
    out = Path(args.out)
    if cfg.C is None or cfg.D is None:
        raise ValueError("converge needs the constants C and D")
    records, stats = convergence_study(cfg.case, cfg.p, cfg.regularity, cfg.l0, cfg.L_values, cfg.lam, cfg.C,
                                       cfg.D, cfg.n_runs, cfg.seed, cfg.rows, args.jobs,
                                       geometry=_geometry(cfg))
    write_runs_csv(records, out / "runs.csv")
    rows = []
    for L, st in stats.items():
        ref = {r.method: r for r in records if r.L == L and r.method != "cossiga"}
        cfg_row = {"case": cfg.case, "p": cfg.p, "regularity": cfg.regularity, "l0": cfg.l0, "L": L,
                   "s": ref["pg-omp"].s, "m": next(r.m for r in records if r.L == L and r.method == "cossiga"),
                   "pg_bs": ref["pg-bs"].h1_rel_err, "pg_omp": ref["pg-omp"].h1_rel_err}
        rows.append((cfg_row, st))
    write_summary_csv(rows, out / "summary.csv")
    report = {str(L): {"subsampling_rate": st.subsampling_rate, "median": st.median} for L, st in stats.items()}
    print(json.dumps(report, indent=2))
    return report


# parameter sets of the published figures
FIGURES = {
    "fig2": dict(case="polygauss2d", p=2, regularity="Cmax", l0=1, L=5, s=9, method="pg-omp"),
    "fig3": dict(case="polygauss2d", p=2, regularity="Cmax", l0=1, L=5),
    "fig4": dict(case="polygauss2d", p=2, regularity="Cmax", l0=1, L=5, s=9, m=76, method="cossiga", n_runs=4),
    "fig5": dict(case="polygauss2d", p=2, regularity="Cmax", l0=1, L=5, s=9, m=304, method="cossiga", n_runs=4),
    "convergence": dict(case="gauss2d", p=2, regularity="Cmax", l0=1, L_values=[4, 5, 6], C=1.6e-2,
                        D={4: 3.19, 5: 6.38, 6: 6.42}, lam=1.0, n_runs=25),
}


def cmd_reproduce(cfg: ExperimentConfig, args) -> dict:
    out = Path(args.out)
    fig = args.figure
    if fig == "convergence":
        return cmd_converge(cfg, args)
    prob = _problem(cfg)
    if fig == "fig3":
        dens = sampling_distribution(prob.R, prob.L, prob.geometry.dim)
        export_density_csv(dens, out / "density.csv")
        report = {"R": prob.R, "N_test": prob.N_test, "nu_l1": float(dens.nu.sum())}
    elif fig == "fig2":
        bs, e_bs = run_method("pg-bs", prob)
        sol, e_omp = run_method("pg-omp", prob, cfg.s)
        export_solution_csv(sol, prob.dictionary, out / "pg_omp_solution.csv")
        with open(out / "pg_bs_coefficients.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["j", "level", "coefficient"])
            for j, c in enumerate(bs.coefficients):
                w.writerow([j, int(prob.dictionary.atom_level[j]), repr(float(c))])
        levels = [int(prob.dictionary.atom_level[j]) for j in sol.support]
        report = {"pg_bs": e_bs, "pg_omp": e_omp, "s": cfg.s, "support": [int(j) for j in sol.support],
                  "support_levels": levels}
    else:
        records = []
        for run in range(cfg.n_runs):
            seed = cfg.seed + run
            sol, err = run_method("cossiga", prob, cfg.s, cfg.m, seed, cfg.rows)
            export_solution_csv(sol, prob.dictionary, out / f"solution_run{run:03d}.csv")
            records.append(_record(run, prob, sol, err, cfg, "cossiga", cfg.s, cfg.m, seed))
        write_runs_csv(records, out / "runs.csv")
        _, e_omp = run_method("pg-omp", prob, cfg.s)
        st = summarize_runs([r.h1_rel_err for r in records], cfg.m / prob.N_dof)
        report = {"m": cfg.m, "N_dof": prob.N_dof, "subsampling_rate": cfg.m / prob.N_dof,
                  "subsampling_rate_pct": round(100 * cfg.m / prob.N_dof, 1), "pg_omp": e_omp,
                  "errors": [r.h1_rel_err for r in records], "median": st.median}
    _write_json(out / f"{fig}.json", report)
    print(json.dumps(report, indent=2))
    return report


# ---------------------------------------------------------------- parsing

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config file")
    common.add_argument("--method", choices=["cossiga", "pg-omp", "pg-bs"])
    common.add_argument("--seed", type=int, help="base seed; run k uses seed + k")
    common.add_argument("--runs", type=int, help="number of random runs")
    common.add_argument("--jobs", type=int, default=1, help="parallel runs")
    common.add_argument("--out", help="output directory")
    common.add_argument("--dump-matrices", action="store_true", help="write the assembled system")
    common.add_argument("--case", choices=sorted(EXACT_SOLUTIONS))
    common.add_argument("-p", "--degree", type=int, dest="p")
    common.add_argument("--regularity", choices=["Cmax", "C0"])
    common.add_argument("--l0", type=int)
    common.add_argument("-L", "--level", type=int, dest="L")
    common.add_argument("-s", "--sparsity", type=int, dest="s")
    common.add_argument("-m", "--samples", type=int, dest="m")
    common.add_argument("-C", type=float, dest="C")
    common.add_argument("-D", type=float, dest="D")
    common.add_argument("--lambda", type=float, dest="lam")
    common.add_argument("--mu", type=float, dest="mu_factor")
    common.add_argument("--levels", type=int, nargs="+", dest="L_values")
    common.add_argument("--geometry", help="builtin domain name or patch JSON file")
    common.add_argument("--rows", choices=["assemble", "full"],
                        help="assemble sampled rows, or read them from the full system")

    parser = argparse.ArgumentParser(prog="cossiga", description="Compressive isogeometric analysis")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("dict-info", parents=[common], help="dictionary and test-space sizes")
    sub.add_parser("solve", parents=[common], help="one solve with the chosen method")
    sub.add_parser("calibrate-c", parents=[common], help="sparsity constant C")
    sub.add_parser("calibrate-d", parents=[common], help="sampling constant D")
    sub.add_parser("converge", parents=[common], help="convergence study over levels")
    rep = sub.add_parser("reproduce", parents=[common], help="published parameter sets")
    rep.add_argument("figure", choices=sorted(FIGURES))
    return parser


OVERRIDES = ("method", "seed", "case", "p", "regularity", "l0", "L", "s", "m", "C", "D", "lam", "mu_factor",
             "L_values", "rows", "geometry")


def effective_config(args) -> ExperimentConfig:
    data: dict = {}
    if getattr(args, "figure", None):
        data.update(FIGURES[args.figure])
    if args.config:
        with open(args.config) as fh:
            data.update(json.load(fh))
    if "lambda" in data:
        data["lam"] = data.pop("lambda")
    for key in OVERRIDES:
        v = getattr(args, key, None)
        if v is not None:
            data[key] = v
    if args.runs is not None:
        data["n_runs"] = args.runs
    if args.out is not None:
        data["output_dir"] = args.out
    return ExperimentConfig.from_dict(data)


COMMANDS = {
    "dict-info": cmd_dict_info,
    "solve": cmd_solve,
    "calibrate-c": cmd_calibrate_c,
    "calibrate-d": cmd_calibrate_d,
    "converge": cmd_converge,
    "reproduce": cmd_reproduce,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = effective_config(args)
        if args.command != "dict-info" or args.out:
            args.out = cfg.output_dir
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            write_config(cfg, out, args.command if args.command != "reproduce" else f"reproduce {args.figure}")
        COMMANDS[args.command](cfg, args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"cossiga: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
