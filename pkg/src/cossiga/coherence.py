"""Sampling density for the test functions and seeded index draws.

The density is proportional to an upper bound on the local coherence
between the test sines and the dictionary. Draws use numpy's PCG64 bit
generator (``numpy.random.default_rng(seed)``): ``m`` uniforms from
``rng.random(m)`` are mapped through the cumulative density by binary
search. Independent runs use ``seed + run_index``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

__all__ = ["SamplingDensity", "nu_bound", "nu_bounds", "sampling_distribution",
           "draw_test_indices", "run_seed", "export_density_csv"]


def nu_bounds(r, L: int) -> np.ndarray:
    """Vectorized coherence bound for frequency vectors ``r`` of shape ``(..., d)``."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 1):
        raise ValueError("frequencies must be >= 1")
    d = r.shape[-1]
    sq = np.sum(r**2, axis=-1)
    prod = np.prod(r, axis=-1)
    first = 2.0 ** ((3 * d - 2) * L) * sq / prod**4
    second = sq / (np.max(r, axis=-1) ** 2 * prod)
    return np.minimum(first, second)


def nu_bound(r, L: int, d: int | None = None) -> float:
    r = np.asarray(r, dtype=float).reshape(-1)
    if d is not None and r.size != d:
        raise ValueError(f"expected {d} frequencies")
    return float(nu_bounds(r, L))


@dataclass(frozen=True)
class SamplingDensity:
    R: int
    d: int
    L: int
    nu: np.ndarray = field(repr=False)
    pi: np.ndarray = field(repr=False)

    @property
    def cdf(self) -> np.ndarray:
        c = np.cumsum(self.pi)
        c[-1] = 1.0
        return c


def sampling_distribution(R: int, L: int, d: int) -> SamplingDensity:
    """Density over the lexicographically ordered frequencies ``[R]^d``."""
    if R < 1:
        raise ValueError("R must be >= 1")
    r = np.indices((R,) * d).reshape(d, -1).T + 1
    nu = nu_bounds(r, L)
    return SamplingDensity(R, d, L, nu, nu / nu.sum())


def run_seed(base_seed: int, run: int) -> int:
    return int(base_seed) + int(run)


def draw_test_indices(density: SamplingDensity, m: int, seed: int) -> np.ndarray:
    """``m`` i.i.d. draws (with replacement) of 0-based test indices."""
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = np.random.default_rng(seed)
    u = rng.random(int(m))
    idx = np.searchsorted(density.cdf, u, side="right")
    return np.minimum(idx, density.pi.size - 1)


def export_density_csv(density: SamplingDensity, path) -> None:
    r = np.indices((density.R,) * density.d).reshape(density.d, -1).T + 1
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["q"] + [f"r{k + 1}" for k in range(density.d)] + ["nu", "pi"])
        for q in range(density.pi.size):
            w.writerow([q] + [int(x) for x in r[q]] + [repr(float(density.nu[q])), repr(float(density.pi[q]))])
