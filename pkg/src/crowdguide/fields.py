"""Grid-sampled fields and the discrete calculus used by the controllers.

Quadrature is plain node summation, ``sum(values) * hx * hy``. On an
``R x R`` node grid over the unit square this integrates the constant 1 to
``(R / (R - 1))**2`` rather than 1; every field that must carry unit mass
(target density, density estimate) is normalized under the same rule, so
the constant cancels wherever densities are compared.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .domain import Domain


class GridMismatchError(ValueError):
    """Two fields (or a field and a feature set) live on different grids."""


def _check_same(a: Domain, b: Domain):
    if a != b:
        raise GridMismatchError(f"fields live on different grids: {a} vs {b}")


@dataclass(eq=False)
class ScalarField:
    domain: Domain
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        r = self.domain.resolution
        if self.values.shape != (r, r):
            raise GridMismatchError(f"expected shape {(r, r)}, got {self.values.shape}")

    @classmethod
    def zeros(cls, domain: Domain) -> ScalarField:
        return cls(domain, np.zeros((domain.resolution,) * 2))

    @classmethod
    def from_function(cls, domain: Domain, fn) -> ScalarField:
        gx, gy = domain.mesh()
        return cls(domain, np.broadcast_to(fn(gx, gy), gx.shape).astype(float))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def __add__(self, other: ScalarField) -> ScalarField:
        _check_same(self.domain, other.domain)
        return ScalarField(self.domain, self.values + other.values)

    def __sub__(self, other: ScalarField) -> ScalarField:
        _check_same(self.domain, other.domain)
        return ScalarField(self.domain, self.values - other.values)

    def __neg__(self) -> ScalarField:
        return ScalarField(self.domain, -self.values)

    def __mul__(self, c: float) -> ScalarField:
        return ScalarField(self.domain, self.values * c)

    __rmul__ = __mul__


@dataclass(eq=False)
class VectorField:
    """Two-component field; ``values[k]`` is component ``k`` on the grid."""

    domain: Domain
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        r = self.domain.resolution
        if self.values.shape != (2, r, r):
            raise GridMismatchError(f"expected shape {(2, r, r)}, got {self.values.shape}")

    @classmethod
    def zeros(cls, domain: Domain) -> VectorField:
        return cls(domain, np.zeros((2,) + (domain.resolution,) * 2))

    @classmethod
    def from_function(cls, domain: Domain, fn) -> VectorField:
        gx, gy = domain.mesh()
        fx, fy = fn(gx, gy)
        return cls(domain, np.stack([np.broadcast_to(fx, gx.shape), np.broadcast_to(fy, gx.shape)]))

    @property
    def x(self) -> np.ndarray:
        return self.values[0]

    @property
    def y(self) -> np.ndarray:
        return self.values[1]

    def norm(self) -> np.ndarray:
        """Node-wise Euclidean magnitude."""
        return np.hypot(self.values[0], self.values[1])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def __add__(self, other: VectorField) -> VectorField:
        _check_same(self.domain, other.domain)
        return VectorField(self.domain, self.values + other.values)

    def __sub__(self, other: VectorField) -> VectorField:
        _check_same(self.domain, other.domain)
        return VectorField(self.domain, self.values - other.values)

    def __neg__(self) -> VectorField:
        return VectorField(self.domain, -self.values)

    def __mul__(self, c: float) -> VectorField:
        return VectorField(self.domain, self.values * c)

    __rmul__ = __mul__


def _grad_array(values: np.ndarray, domain: Domain) -> np.ndarray:
    # central differences inside, first-order one-sided on the boundary
    hx, hy = domain.spacing
    gx, gy = np.gradient(values, hx, hy, edge_order=1)
    return np.stack([gx, gy])


def gradient(f: ScalarField) -> VectorField:
    return VectorField(f.domain, _grad_array(f.values, f.domain))


def divergence(v: VectorField) -> ScalarField:
    hx, hy = v.domain.spacing
    dx = np.gradient(v.values[0], hx, axis=0, edge_order=1)
    dy = np.gradient(v.values[1], hy, axis=1, edge_order=1)
    return ScalarField(v.domain, dx + dy)


def advection(u: VectorField) -> VectorField:
    """Convective term ``(u . grad) u``, component-wise."""
    out = np.empty_like(u.values)
    for k in range(2):
        g = _grad_array(u.values[k], u.domain)
        out[k] = u.values[0] * g[0] + u.values[1] * g[1]
    return VectorField(u.domain, out)


@lru_cache(maxsize=8)
def _convolution_operator(domain: Domain, potential) -> np.ndarray:
    from .forces import grad_U

    nodes = domain.nodes()
    offsets = nodes[:, None, :] - nodes[None, :, :]
    kernel = grad_U(offsets, potential) * domain.cell_area
    # (2, M, M): component, target node, source node
    return np.ascontiguousarray(np.moveaxis(kernel, -1, 0))


def interaction_convolution(rho: ScalarField, potential) -> VectorField:
    """Quadrature of ``(grad U * rho)(x) = sum_y grad U(x - y) rho(y) h^2``.

    The dense node-to-node operator is built once per (grid, potential)
    pair and cached.
    """
    op = _convolution_operator(rho.domain, potential)
    flat = rho.values.ravel()
    r = rho.domain.resolution
    return VectorField(rho.domain, (op @ flat).reshape(2, r, r))


def l2_norm(f: ScalarField | VectorField) -> float:
    return float(np.sqrt(np.sum(f.values**2) * f.domain.cell_area))


def integrate(f: ScalarField) -> float:
    return float(np.sum(f.values) * f.domain.cell_area)


def integrate_vector_weighted(features: np.ndarray, v: VectorField) -> np.ndarray:
    """Weight-space integral ``int phi v dx`` for block-structured features.

    ``features`` holds ``m`` scalar basis functions on the grid, shape
    ``(m, R, R)``. The result has length ``2m``: entries ``0..m-1`` pair
    the basis with the x-component of ``v``, entries ``m..2m-1`` with the
    y-component.
    """
    features = np.asarray(features, dtype=float)
    if features.ndim != 3 or features.shape[1:] != v.values.shape[1:]:
        raise GridMismatchError(
            f"features of shape {features.shape} do not match grid {v.values.shape[1:]}"
        )
    flat = features.reshape(len(features), -1)
    ix = flat @ v.values[0].ravel()
    iy = flat @ v.values[1].ravel()
    return np.concatenate([ix, iy]) * v.domain.cell_area


def sample(f: ScalarField | VectorField, points) -> np.ndarray:
    """Bilinear interpolation at ``points``; points outside are clamped.

    Returns a scalar/2-vector for a single point, or stacked values for an
    ``(P, 2)`` array of points.
    """
    d = f.domain
    p = np.asarray(points, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    lo, hi = np.asarray(d.lower), np.asarray(d.upper)
    p = np.clip(p, lo, hi)
    h = np.asarray(d.spacing)
    s = (p - lo) / h
    i0 = np.clip(np.floor(s).astype(int), 0, d.resolution - 2)
    frac = s - i0
    ax, ay = frac[:, 0], frac[:, 1]
    ix, iy = i0[:, 0], i0[:, 1]

    def interp(a):
        return (
            a[..., ix, iy] * (1 - ax) * (1 - ay)
            + a[..., ix + 1, iy] * ax * (1 - ay)
            + a[..., ix, iy + 1] * (1 - ax) * ay
            + a[..., ix + 1, iy + 1] * ax * ay
        )

    out = interp(f.values)
    if isinstance(f, VectorField):
        out = out.T  # (P, 2)
    return out[0] if single else out


def time_derivative(prev, curr, dt: float):
    """Backward difference ``(curr - prev) / dt``; zero when ``prev`` is None."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if prev is None:
        return type(curr)(curr.domain, np.zeros_like(curr.values))
    if type(prev) is not type(curr):
        raise GridMismatchError("time derivative of fields of different kinds")
    _check_same(prev.domain, curr.domain)
    return type(curr)(curr.domain, (curr.values - prev.values) / dt)
