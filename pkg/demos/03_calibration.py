"""Calibrating the sparsity constant C and the sampling constant D.

C comes from the OMP error curve of the full system: the smallest s whose
error is within mu times the least-squares error.  D comes from CossIGA
medians over a grid of m: for each s, the first m within mu times the
PG-OMP(s) error, then a line through the origin of m against s.
Small levels keep this demo quick; the fitted values are illustrative.

Run: python demos/03_calibration.py
"""
from cossiga import Problem, calibrate_C, calibrate_D

case, p, L = "gauss2d", 2, 4
prob = Problem(case, p, "Cmax", L)

cal_c = calibrate_C(case, p, "Cmax", L, 2.0, problem=prob)
ref = cal_c.reference
print(f"L={L}, N_dof={prob.N_dof}: PG-BS error {ref['pg_bs']:.4f}, "
      f"s*={ref['s_star']}, C={cal_c.C:.3e}")

cal_d = calibrate_D(case, p, "Cmax", L, 2.0, C=cal_c.C, n_runs=9, base_seed=0,
                    problem=prob, rows="full")
for s, m in cal_d.picks:
    print(f"  s={s:3d} -> m*={m}")
print(f"D={cal_d.D:.2f}")
