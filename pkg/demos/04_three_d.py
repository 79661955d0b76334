"""CossIGA on the thick ring.

The trivariate problem has many more test functions than unknowns, so
row subsampling saves most of the assembly.  At this coarse level the
narrow Gaussian is under-resolved and every method has a large error; the
point is that the compressive solution tracks the full references.

Run: python demos/04_three_d.py
"""
import numpy as np

from cossiga import Problem

prob = Problem("polygauss3d", 2, "Cmax", 3)
print(f"N_dict={prob.N_dict}, N_dof={prob.N_dof}, N_test={prob.N_test}")
_, e_bs = prob.pg_bs()
_, e_omp = prob.pg_omp(10)
print(f"PG-BS {e_bs:.4f}, PG-OMP(10) {e_omp:.4f}")

m = int(0.2 * prob.N_dof)
errs = [prob.cossiga(10, m, seed)[1] for seed in range(5)]
print(f"CossIGA s=10, m={m} ({100 * m / prob.N_test:.1f}% of the test rows): "
      f"median {np.median(errs):.4f}")
