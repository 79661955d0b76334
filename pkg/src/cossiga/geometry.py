"""Single-patch NURBS geometry maps from the unit cube to a physical domain."""
from __future__ import annotations

import json
from dataclasses import dataclass
from math import sqrt
from pathlib import Path

import numpy as np

from .splines import KnotVector, basis_matrix

__all__ = [
    "GeometryError",
    "GeometryPatch",
    "map_point",
    "jacobian",
    "builtin_domain",
    "BUILTIN_DOMAINS",
    "load_patch",
    "save_patch",
]


class GeometryError(ValueError):
    """Raised for non-invertible or otherwise unusable geometry maps."""


def tensor_apply(coefs, mats):
    """Apply one matrix per leading axis: ``out[q1..qd, ...] = sum_i coefs[i1..id, ...] prod_k mats[k][i_k, q_k]``."""
    out = np.asarray(coefs)
    for k, M in enumerate(mats):
        out = np.moveaxis(np.tensordot(out, M, axes=([k], [0])), -1, k)
    return out


@dataclass(frozen=True, eq=False)
class GeometryPatch:
    """Rational tensor-product spline map ``F``.

    ``control_points`` has shape ``(n_1, ..., n_d, d)`` and ``weights`` shape
    ``(n_1, ..., n_d)``, indexed by the univariate basis indices of
    ``knot_vectors``.
    """

    knot_vectors: tuple
    control_points: np.ndarray
    weights: np.ndarray
    name: str = "patch"

    def __post_init__(self):
        kvs = tuple(self.knot_vectors)
        cp = np.asarray(self.control_points, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        d = len(kvs)
        if d not in (1, 2, 3):
            raise GeometryError("only 1, 2 or 3 parametric dimensions are supported")
        shape = tuple(kv.n for kv in kvs)
        if cp.shape != shape + (d,):
            raise GeometryError(f"control points must have shape {shape + (d,)}, got {cp.shape}")
        if w.shape != shape:
            raise GeometryError(f"weights must have shape {shape}, got {w.shape}")
        if np.any(w <= 0.0):
            raise GeometryError("weights must be strictly positive")
        object.__setattr__(self, "knot_vectors", kvs)
        object.__setattr__(self, "control_points", cp)
        object.__setattr__(self, "weights", w)
        self._check_invertible()

    @property
    def dim(self) -> int:
        return len(self.knot_vectors)

    @property
    def degrees(self) -> tuple:
        return tuple(kv.degree for kv in self.knot_vectors)

    def _homogeneous(self):
        return np.concatenate([self.control_points * self.weights[..., None], self.weights[..., None]], axis=-1)

    def eval_grid(self, axes_points, jac: bool = True):
        """Map and Jacobian on the tensor grid spanned by ``axes_points``.

        Returns ``x`` of shape ``(Q_1, ..., Q_d, d)`` and, if requested,
        ``J`` of shape ``(Q_1, ..., Q_d, d, d)`` with ``J[..., :, k] = dF/dxi_k``.
        """
        d = self.dim
        pts = [np.asarray(a, dtype=float).reshape(-1) for a in axes_points]
        if len(pts) != d:
            raise GeometryError(f"expected {d} coordinate arrays")
        vals = [basis_matrix(kv, a) for kv, a in zip(self.knot_vectors, pts)]
        H = tensor_apply(self._homogeneous(), vals)
        wsum = H[..., d]
        x = H[..., :d] / wsum[..., None]
        if not jac:
            return x, None
        ders = [basis_matrix(kv, a, derivative=True) for kv, a in zip(self.knot_vectors, pts)]
        J = np.empty(x.shape + (d,))
        for k in range(d):
            mats = [ders[i] if i == k else vals[i] for i in range(d)]
            Hk = tensor_apply(self._homogeneous(), mats)
            J[..., :, k] = (Hk[..., :d] - x * Hk[..., d : d + 1]) / wsum[..., None]
        return x, J

    def eval_points(self, xi, jac: bool = True):
        """Map and Jacobian at scattered parametric points ``xi`` of shape ``(N, d)``."""
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        d = self.dim
        if xi.shape[1] != d:
            raise GeometryError(f"points must have {d} coordinates")
        if np.any(xi < 0.0) or np.any(xi > 1.0):
            raise ValueError("parametric points must lie in [0, 1]^d")
        vals = [basis_matrix(kv, xi[:, k]) for k, kv in enumerate(self.knot_vectors)]
        Hw = self._homogeneous()

        def combine(mats):
            prod = mats[0].T
            for M in mats[1:]:
                prod = prod[..., None] * M.T.reshape((M.shape[1],) + (1,) * (prod.ndim - 1) + (M.shape[0],))
            return np.tensordot(prod, Hw, axes=d)

        H = combine(vals)
        x = H[:, :d] / H[:, d : d + 1]
        if not jac:
            return x, None
        ders = [basis_matrix(kv, xi[:, k], derivative=True) for k, kv in enumerate(self.knot_vectors)]
        J = np.empty((xi.shape[0], d, d))
        for k in range(d):
            Hk = combine([ders[i] if i == k else vals[i] for i in range(d)])
            J[:, :, k] = (Hk[:, :d] - x * Hk[:, d : d + 1]) / H[:, d : d + 1]
        return x, J

    def _check_invertible(self, level: int = 3, points: int = 4):
        nodes, _ = np.polynomial.legendre.leggauss(points)
        ne = 2**level
        probe = ((np.arange(ne)[:, None] + 0.5 * (nodes[None, :] + 1.0)) / ne).ravel()
        _, J = self.eval_grid([probe] * self.dim)
        det = np.linalg.det(J)
        if not np.all(det > 0.0):
            raise GeometryError(f"{self.name}: Jacobian determinant is not positive on the probe grid")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dim": self.dim,
            "degrees": list(self.degrees),
            "knots": [kv.knots.tolist() for kv in self.knot_vectors],
            "control_points": self.control_points.tolist(),
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GeometryPatch":
        try:
            degrees = data["degrees"]
            knots = data["knots"]
            kvs = tuple(KnotVector(np.asarray(k, dtype=float), int(p)) for k, p in zip(knots, degrees))
            if "dim" in data and int(data["dim"]) != len(kvs):
                raise GeometryError("dim does not match the number of knot vectors")
            return cls(kvs, np.asarray(data["control_points"]), np.asarray(data["weights"]), data.get("name", "patch"))
        except KeyError as exc:
            raise GeometryError(f"missing field {exc.args[0]!r} in geometry description") from None


def _check_param(g: GeometryPatch, xi):
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if xi.size != g.dim:
        raise ValueError(f"expected a point with {g.dim} coordinates")
    if np.any(xi < 0.0) or np.any(xi > 1.0):
        raise ValueError(f"parametric point {xi} outside [0, 1]^{g.dim}")
    return xi


def map_point(g: GeometryPatch, xi) -> np.ndarray:
    """Physical image ``F(xi)`` of one parametric point."""
    xi = _check_param(g, xi)
    x, _ = g.eval_points(xi[None, :], jac=False)
    return x[0]


def jacobian(g: GeometryPatch, xi) -> np.ndarray:
    """``dF/dxi`` at one parametric point; column ``k`` is the derivative along ``xi_k``."""
    xi = _check_param(g, xi)
    _, J = g.eval_points(xi[None, :])
    return J[0]


def _linear_kv():
    return KnotVector(np.array([0.0, 0.0, 1.0, 1.0]), 1)


def _quadratic_kv():
    return KnotVector(np.array([0.0, 0.0, 0.0, 1.0, 1.0, 1.0]), 2)


def unit_square() -> GeometryPatch:
    cp = np.array([[[0.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [1.0, 1.0]]])
    return GeometryPatch((_linear_kv(), _linear_kv()), cp, np.ones((2, 2)), "unit_square")


def unit_cube() -> GeometryPatch:
    grid = np.stack(np.meshgrid([0.0, 1.0], [0.0, 1.0], [0.0, 1.0], indexing="ij"), axis=-1)
    return GeometryPatch((_linear_kv(),) * 3, grid, np.ones((2, 2, 2)), "unit_cube")


def quarter_annulus(inner: float = 1.0, outer: float = 2.0) -> GeometryPatch:
    """Quarter ring; ``xi_1`` is radial (inner to outer), ``xi_2`` angular from the x_1-axis."""
    arc = np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    cp = np.stack([inner * arc, outer * arc])
    w = np.tile([1.0, sqrt(2.0) / 2.0, 1.0], (2, 1))
    return GeometryPatch((_linear_kv(), _quadratic_kv()), cp, w, "quarter_annulus")


def thick_ring(inner: float = 1.0, outer: float = 2.0, height: float = 1.0) -> GeometryPatch:
    """Quarter ring extruded along ``x_3`` over ``[0, height]``; ``xi_3`` is the height."""
    base = quarter_annulus(inner, outer)
    cp = np.empty((2, 3, 2, 3))
    cp[..., :2] = base.control_points[:, :, None, :]
    cp[..., 2] = np.array([0.0, height])[None, None, :]
    w = np.repeat(base.weights[:, :, None], 2, axis=2)
    return GeometryPatch((_linear_kv(), _quadratic_kv(), _linear_kv()), cp, w, "thick_ring")


BUILTIN_DOMAINS = {
    "unit_square": unit_square,
    "unit_cube": unit_cube,
    "quarter_annulus": quarter_annulus,
    "thick_ring": thick_ring,
}


def builtin_domain(name: str) -> GeometryPatch:
    try:
        factory = BUILTIN_DOMAINS[name]
    except KeyError:
        raise ValueError(f"unknown domain {name!r}; choose from {sorted(BUILTIN_DOMAINS)}") from None
    return factory()


def save_patch(g: GeometryPatch, path) -> None:
    Path(path).write_text(json.dumps(g.to_dict(), indent=2))


def load_patch(path) -> GeometryPatch:
    return GeometryPatch.from_dict(json.loads(Path(path).read_text()))
