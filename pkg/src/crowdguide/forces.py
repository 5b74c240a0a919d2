"""Microscopic force laws acting on humans.

Human-human interaction uses a Morse-type potential

    U(xi) = C_r exp(-|xi| / sigma_r) - C_a exp(-|xi| / sigma_a)

and each robot projects a compactly supported sign field
``Kbar(x - r_i) (cos theta_i, sin theta_i)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .domain import Domain, InvalidConfigError, RobotTeamState
from .fields import VectorField

REGIMES = ("none", "static", "dynamic")


@dataclass(frozen=True)
class InteractionPotentialParams:
    c_rep: float = 0.02
    sigma_rep: float = 0.05
    c_att: float = 0.01
    sigma_att: float = 0.1

    def __post_init__(self):
        if self.sigma_rep <= 0 or self.sigma_att <= 0:
            raise InvalidConfigError("potential length scales must be positive")
        if self.c_rep < 0 or self.c_att < 0:
            raise InvalidConfigError("potential strengths must be non-negative")
        if self.c_rep > 0 and self.c_att > 0:
            if not (
                self.c_rep / self.sigma_rep > self.c_att / self.sigma_att
                and self.sigma_rep < self.sigma_att
            ):
                warnings.warn(
                    "interaction potential is not short-range repulsive / long-range attractive",
                    stacklevel=3,
                )


@dataclass(frozen=True)
class NavigationKernelParams:
    amplitude: float = 0.05
    scale: float = 0.03
    radius: float = 0.15

    def __post_init__(self):
        if self.amplitude < 0 or self.scale <= 0 or self.radius <= 0:
            raise InvalidConfigError("navigation kernel parameters out of range")


@dataclass(frozen=True)
class EnvForceParams:
    g1_amplitude: float = 0.01
    g1_rate: float = math.pi / 5
    g2_coefficient: float = 0.0005
    g2_radius: float = 0.03
    g2_min_distance: float = 0.005

    def __post_init__(self):
        if self.g2_coefficient < 0 or self.g2_radius <= 0 or self.g2_min_distance <= 0:
            raise InvalidConfigError("environment force parameters out of range")


def potential(xi, params: InteractionPotentialParams) -> np.ndarray:
    d = np.linalg.norm(np.asarray(xi, dtype=float), axis=-1)
    return params.c_rep * np.exp(-d / params.sigma_rep) - params.c_att * np.exp(-d / params.sigma_att)


def potential_radial_derivative(d, params: InteractionPotentialParams) -> np.ndarray:
    """dU/d|xi| as a function of the distance."""
    d = np.asarray(d, dtype=float)
    return (
        -(params.c_rep / params.sigma_rep) * np.exp(-d / params.sigma_rep)
        + (params.c_att / params.sigma_att) * np.exp(-d / params.sigma_att)
    )


def grad_U(xi, params: InteractionPotentialParams) -> np.ndarray:
    """Gradient of the interaction potential; zero at the cusp ``xi = 0``.

    Broadcasts over leading axes: ``xi`` has shape ``(..., 2)``.
    """
    xi = np.asarray(xi, dtype=float)
    d = np.linalg.norm(xi, axis=-1)
    safe = np.where(d > 0, d, 1.0)
    scale = np.where(d > 0, potential_radial_derivative(d, params) / safe, 0.0)
    return xi * scale[..., None]


def pairwise_human_forces(positions, params: InteractionPotentialParams) -> np.ndarray:
    """``-(1/N) sum_{k != j} grad U(x_j - x_k)`` for every human, vectorized."""
    x = np.asarray(positions, dtype=float)
    n = len(x)
    if n < 2:
        return np.zeros_like(x)
    diff = x[:, None, :] - x[None, :, :]
    return -grad_U(diff, params).sum(axis=1) / n


def pairwise_human_forces_naive(positions, params: InteractionPotentialParams) -> np.ndarray:
    x = np.asarray(positions, dtype=float)
    n = len(x)
    out = np.zeros_like(x)
    for j in range(n):
        for k in range(n):
            if k != j:
                out[j] -= grad_U(x[j] - x[k], params)
    return out / n


def uniform_force(t: float, params: EnvForceParams) -> np.ndarray:
    """Spatially uniform oscillating part of the environment force."""
    s = -params.g1_amplitude * math.sin(params.g1_rate * t)
    return np.array([s, s])


def obstacle_force(points, centers, params: EnvForceParams) -> np.ndarray:
    """Short-range inverse-distance repulsion from obstacle centers.

    Acts only within ``g2_radius`` of a center; the distance entering the
    magnitude is clamped below at ``g2_min_distance``.
    """
    p = np.atleast_2d(np.asarray(points, dtype=float))
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    out = np.zeros_like(p)
    if len(centers) == 0:
        return out
    diff = p[:, None, :] - centers[None, :, :]
    d = np.linalg.norm(diff, axis=-1)
    active = (d <= params.g2_radius) & (d > 0)
    dc = np.maximum(d, params.g2_min_distance)
    mag = np.where(active, params.g2_coefficient / (dc * dc), 0.0)
    unit = diff / np.where(d > 0, d, 1.0)[..., None]
    out += np.sum(unit * mag[..., None], axis=1)
    return out


def env_force(points, t: float, obstacle_centers, params: EnvForceParams, regime: str) -> np.ndarray:
    """Unknown environment force at ``points`` (shape ``(2,)`` or ``(P, 2)``)."""
    if regime not in REGIMES:
        raise InvalidConfigError(f"unknown obstacle regime {regime!r}")
    p = np.asarray(points, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    out = np.broadcast_to(uniform_force(t, params), p.shape).copy()
    if regime != "none":
        out += obstacle_force(p, obstacle_centers, params)
    return out[0] if single else out


def navigation_kernel(xi, params: NavigationKernelParams) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    d2 = np.sum(xi * xi, axis=-1)
    inside = d2 < params.radius**2
    return np.where(inside, params.amplitude * np.exp(-d2 / params.scale), 0.0)


def kernel_gradient(xi, params: NavigationKernelParams) -> np.ndarray:
    """Spatial gradient of the navigation kernel (zero outside its support)."""
    xi = np.asarray(xi, dtype=float)
    k = navigation_kernel(xi, params)
    return (-2.0 / params.scale) * k[..., None] * xi


def navigation_force(points, robots: RobotTeamState, params: NavigationKernelParams) -> np.ndarray:
    """Collective sign field ``F(x) = sum_i Kbar(x - r_i) (cos, sin)(theta_i)``."""
    p = np.asarray(points, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    k = navigation_kernel(p[:, None, :] - robots.positions[None, :, :], params)
    out = k @ robots.headings()
    return out[0] if single else out


def navigation_force_field(robots: RobotTeamState, domain: Domain, params: NavigationKernelParams) -> VectorField:
    r = domain.resolution
    f = navigation_force(domain.nodes(), robots, params)
    return VectorField(domain, f.T.reshape(2, r, r))


def force_jacobians(x, position, direction: float, params: NavigationKernelParams):
    """Derivatives of one robot's sign field at ``x``.

    Returns ``(F_xi, F_theta)``: the 2x2 Jacobian with respect to the offset
    ``xi = x - r_i`` and the derivative with respect to ``theta_i``.
    """
    xi = np.asarray(x, dtype=float) - np.asarray(position, dtype=float)
    head = np.array([math.cos(direction), math.sin(direction)])
    f_xi = np.outer(head, kernel_gradient(xi, params))
    f_theta = navigation_kernel(xi, params) * np.array([-head[1], head[0]])
    return f_xi, f_theta
