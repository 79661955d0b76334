"""Manufactured solutions of the homogeneous Poisson problem.

Gradients are written out by hand; ``x`` arrays carry the physical
coordinates in their last axis.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["ExactSolution", "EXACT_SOLUTIONS", "get_exact", "CASE_DOMAINS"]

CENTER_2D = (0.5, 1.4)


@dataclass(frozen=True)
class ExactSolution:
    """``resolution_level`` is the coarsest uniform mesh level on which the
    default quadrature resolves the solution's finest feature."""

    name: str
    dim: int
    value: Callable
    gradient: Callable
    resolution_level: int = 0


def _gauss(x, center, width):
    diff = x - np.asarray(center)
    g = np.exp(-np.sum(diff**2, axis=-1) / width**2)
    return g, (-2.0 / width**2) * diff * g[..., None]


def _ring_poly(x):
    # x1 x2 (rho - 1)(4 - rho) / 5 with rho = x1^2 + x2^2
    x1, x2 = x[..., 0], x[..., 1]
    rho = x1**2 + x2**2
    q = (rho - 1.0) * (4.0 - rho)
    dq = 5.0 - 2.0 * rho  # dq/drho
    val = x1 * x2 * q / 5.0
    g1 = (x2 * q + x1 * x2 * dq * 2.0 * x1) / 5.0
    g2 = (x1 * q + x1 * x2 * dq * 2.0 * x2) / 5.0
    return val, np.stack([g1, g2], axis=-1)


def _gauss2d_value(x):
    return _gauss(x, CENTER_2D, 0.08)[0]


def _gauss2d_grad(x):
    return _gauss(x, CENTER_2D, 0.08)[1]


def _polygauss2d_value(x):
    return _ring_poly(x)[0] + _gauss(x, CENTER_2D, 0.04)[0]


def _polygauss2d_grad(x):
    return _ring_poly(x)[1] + _gauss(x, CENTER_2D, 0.04)[1]


def _poly2d_value(x):
    return _ring_poly(x)[0]


def _poly2d_grad(x):
    return _ring_poly(x)[1]


def _poly3d(x):
    pv, pg = _ring_poly(x[..., :2])
    x3 = x[..., 2]
    h = x3 * (x3 - 1.0)
    val = pv * h
    grad = np.concatenate([pg * h[..., None], (pv * (2.0 * x3 - 1.0))[..., None]], axis=-1)
    return val, grad


def _polygauss3d_value(x):
    return _poly3d(x)[0] + _gauss(x, CENTER_2D + (0.5,), 0.04)[0]


def _polygauss3d_grad(x):
    return _poly3d(x)[1] + _gauss(x, CENTER_2D + (0.5,), 0.04)[1]


def _sine_value(x):
    return np.prod(np.sin(np.pi * x), axis=-1)


def _sine_grad(x):
    s = np.sin(np.pi * x)
    c = np.pi * np.cos(np.pi * x)
    d = x.shape[-1]
    cols = []
    for k in range(d):
        term = c[..., k]
        for i in range(d):
            if i != k:
                term = term * s[..., i]
        cols.append(term)
    return np.stack(cols, axis=-1)


EXACT_SOLUTIONS = {
    "gauss2d": ExactSolution("gauss2d", 2, _gauss2d_value, _gauss2d_grad, 6),
    "polygauss2d": ExactSolution("polygauss2d", 2, _polygauss2d_value, _polygauss2d_grad, 7),
    "polygauss3d": ExactSolution("polygauss3d", 3, _polygauss3d_value, _polygauss3d_grad, 5),
    "poly_only_2d": ExactSolution("poly_only_2d", 2, _poly2d_value, _poly2d_grad, 0),
    "sine_mode": ExactSolution("sine_mode", 2, _sine_value, _sine_grad, 0),
}

# physical domain each case is posed on
CASE_DOMAINS = {
    "gauss2d": "quarter_annulus",
    "polygauss2d": "quarter_annulus",
    "polygauss3d": "thick_ring",
    "poly_only_2d": "quarter_annulus",
    "sine_mode": "unit_square",
}


def get_exact(name: str) -> ExactSolution:
    try:
        return EXACT_SOLUTIONS[name]
    except KeyError:
        raise ValueError(f"unknown exact solution {name!r}; choose from {sorted(EXACT_SOLUTIONS)}") from None
