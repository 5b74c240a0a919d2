"""Macrostate reconstruction: crowd density and velocity on the grid.

Density is a Gaussian kernel density estimate. The crowd velocity field is
a Nadaraya-Watson kernel regression of the human velocities with the same
Gaussian kernel, which stays defined away from the samples (plain
scattered-data interpolation does not).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import Domain, InvalidConfigError
from .fields import ScalarField, VectorField


class EstimationError(ValueError):
    pass


@dataclass(frozen=True)
class KdeConfig:
    bandwidth: float = 0.07

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise InvalidConfigError("KDE bandwidth must be positive")


@dataclass(frozen=True)
class VelocityEstimatorConfig:
    bandwidth: float = 0.07
    min_weight: float = 1e-12

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise InvalidConfigError("velocity bandwidth must be positive")


def gaussian_kernel(z) -> np.ndarray:
    """Standard bivariate normal density ``exp(-|z|^2 / 2) / (2 pi)``."""
    z = np.asarray(z, dtype=float)
    return np.exp(-0.5 * np.sum(z * z, axis=-1)) / (2 * np.pi)


def kernel_weights(nodes: np.ndarray, positions: np.ndarray, bandwidth: float) -> np.ndarray:
    """Kernel matrix ``H((node - x_j) / h)``, shape ``(M, N)``."""
    d2 = (
        np.sum(nodes**2, axis=1)[:, None]
        + np.sum(positions**2, axis=1)[None, :]
        - 2.0 * nodes @ positions.T
    )
    d2 = np.maximum(d2, 0.0)
    return np.exp(-0.5 * d2 / bandwidth**2) / (2 * np.pi)


def _as_points(positions) -> np.ndarray:
    x = np.asarray(positions, dtype=float).reshape(-1, 2)
    if len(x) == 0:
        raise EstimationError("cannot estimate from an empty sample")
    return x


def kde_density(
    positions, cfg: KdeConfig, domain: Domain, *, normalize: bool = True, weights: np.ndarray | None = None
) -> ScalarField:
    """Kernel density estimate at every grid node.

    With ``normalize`` the field is rescaled to unit grid mass, which is the
    same normalization the target density receives. ``weights`` lets a
    caller reuse a precomputed :func:`kernel_weights` matrix.
    """
    x = _as_points(positions)
    h = cfg.bandwidth
    if weights is None:
        weights = kernel_weights(domain.nodes(), x, h)
    r = domain.resolution
    rho = weights.sum(axis=1).reshape(r, r) / (len(x) * h * h)
    if normalize:
        mass = rho.sum() * domain.cell_area
        if mass <= 0:
            raise EstimationError("density estimate vanishes on the grid")
        rho = rho / mass
    return ScalarField(domain, rho)


def velocity_field_estimate(
    positions, velocities, cfg: VelocityEstimatorConfig, domain: Domain, *, weights: np.ndarray | None = None
) -> VectorField:
    x = _as_points(positions)
    v = np.asarray(velocities, dtype=float).reshape(-1, 2)
    if len(v) != len(x):
        raise EstimationError(f"{len(x)} positions but {len(v)} velocities")
    if weights is None:
        weights = kernel_weights(domain.nodes(), x, cfg.bandwidth)
    total = weights.sum(axis=1)
    num = weights @ v
    ok = total >= cfg.min_weight
    u = np.zeros_like(num)
    u[ok] = num[ok] / total[ok, None]
    r = domain.resolution
    return VectorField(domain, u.T.reshape(2, r, r))
