"""Multilevel dictionary and a sparse Petrov-Galerkin solution.

Builds the quadratic, maximally smooth dictionary on the quarter annulus,
solves the full Petrov-Galerkin system for the polynomial-times-Gaussian
solution, and prints where the nine atoms chosen by OMP live.  A coarse
atom captures the smooth polynomial factor, fine atoms the narrow bump.

Run: python demos/01_dictionary_and_stems.py
"""
import numpy as np

from cossiga import Problem, dict_cardinality

p, L = 2, 5
n_dict, n_dof = dict_cardinality(p, "Cmax", 1, L, 2)
print(f"p={p}, levels 1..{L}: N_dict={n_dict}, N_dof={n_dof}")

prob = Problem("polygauss2d", p, "Cmax", L, 1)
print(f"test space R={prob.R}, N_test={prob.N_test}")

# reference: every test function, least squares over the whole dictionary
x_bs, e_bs = prob.pg_bs()
print(f"PG-BS     relative H1 error {e_bs:.4f}, nonzeros {np.count_nonzero(np.abs(x_bs.coefficients) > 1e-12)}")

# sparse: the same rows, but only nine atoms
sol, e9 = prob.pg_omp(9)
print(f"PG-OMP(9) relative H1 error {e9:.4f}")
levels = prob.dictionary.atom_level
for j, c in sorted(zip(sol.support, sol.coefficients[sol.support]), key=lambda t: -abs(t[1])):
    print(f"  atom {j:5d}  level {int(levels[j])}  coefficient {c:+.4e}")

# error along the OMP path: the first few atoms do most of the work
path = prob.pg_omp_path(30)
for s in (1, 3, 9, 15, 30):
    print(f"  s={s:2d}: error {prob.error(path.solution(s)):.4f}")
