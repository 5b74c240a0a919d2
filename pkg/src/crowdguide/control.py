"""Robot controllers.

Position control spreads the robots with inverse-distance repulsion.
Direction control is a three-stage backstepping design on the crowd
macrostates: a density-feedback virtual velocity ``u_d``, a stabilizing
force field ``F_d`` with an RBF estimate of the unknown force, and
per-robot turning rates ``eta_i`` that steer the robots' sign field
``F`` toward ``F_d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .domain import Domain, InvalidConfigError, RobotTeamState
from .fields import (
    ScalarField,
    VectorField,
    advection,
    gradient,
    integrate_vector_weighted,
    interaction_convolution,
)
from .forces import InteractionPotentialParams, NavigationKernelParams, kernel_gradient, navigation_kernel


class ControllerInconsistencyError(RuntimeError):
    """An active robot has a (near) zero controllability integral."""


@dataclass(frozen=True)
class PositionControlParams:
    k_robot: float = 0.003
    k_obstacle: float = 0.002
    viscosity: float = 1.0
    sensing_radius: float = 0.2
    min_distance: float = 0.01
    walls_as_obstacles: bool = True

    def __post_init__(self):
        if min(self.k_robot, self.k_obstacle, self.viscosity, self.sensing_radius, self.min_distance) <= 0:
            raise InvalidConfigError("position control gains must be positive")


@dataclass(frozen=True)
class DirectionControlParams:
    k_rho: float = 0.05
    k_u: float = 0.1
    k_eta: float = 0.1
    grad_eps: float = 1e-6
    denom_eps: float = 1e-8
    max_rate: float = math.pi

    def __post_init__(self):
        if min(self.k_rho, self.k_u, self.k_eta, self.grad_eps, self.denom_eps, self.max_rate) <= 0:
            raise InvalidConfigError("direction control gains must be positive")


@dataclass(frozen=True)
class AdaptiveParams:
    lattice: int = 5
    width: float = 0.15
    gain: float = 0.1
    leakage: float = 0.1
    enabled: bool = True

    def __post_init__(self):
        if self.lattice < 1 or self.width <= 0 or self.gain <= 0 or self.leakage <= 0:
            raise InvalidConfigError("adaptive approximator parameters out of range")


def rbf_centers(domain: Domain, lattice: int) -> np.ndarray:
    xs = np.linspace(domain.lower[0], domain.upper[0], lattice)
    ys = np.linspace(domain.lower[1], domain.upper[1], lattice)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


def rbf_features(points, centers: np.ndarray, width: float) -> np.ndarray:
    """Gaussian features ``exp(-|x - c_k|^2 / width^2)``, shape ``(..., m)``."""
    p = np.asarray(points, dtype=float)
    d2 = np.sum((p[..., None, :] - centers) ** 2, axis=-1)
    return np.exp(-d2 / width**2)


@lru_cache(maxsize=8)
def _grid_features(domain: Domain, lattice: int, width: float) -> np.ndarray:
    gx, gy = domain.mesh()
    phi = rbf_features(np.stack([gx, gy], axis=-1), rbf_centers(domain, lattice), width)
    feats = np.ascontiguousarray(np.moveaxis(phi, -1, 0))
    feats.setflags(write=False)
    return feats


@dataclass
class AdaptiveApproximator:
    """Linear-in-weights estimate ``phi(x)^T w_hat`` of the unknown force.

    Weights ``0..m-1`` drive the x-component and ``m..2m-1`` the
    y-component, with the same scalar features in both blocks.
    """

    domain: Domain
    params: AdaptiveParams = field(default_factory=AdaptiveParams)
    weights: np.ndarray | None = None

    def __post_init__(self):
        m = self.params.lattice**2
        if self.weights is None:
            self.weights = np.zeros(2 * m)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (2 * m,):
            raise InvalidConfigError(f"expected {2 * m} weights, got {self.weights.shape}")

    @property
    def size(self) -> int:
        return self.params.lattice**2

    @property
    def centers(self) -> np.ndarray:
        return rbf_centers(self.domain, self.params.lattice)

    def features(self) -> np.ndarray:
        """Basis functions on the grid, shape ``(m, R, R)``."""
        return _grid_features(self.domain, self.params.lattice, self.params.width)

    def copy(self) -> AdaptiveApproximator:
        return AdaptiveApproximator(self.domain, self.params, self.weights.copy())


@dataclass
class ControllerMemory:
    """Previous-iteration fields for the backward-difference time terms."""

    prev_u_d: VectorField | None = None
    prev_f_d: VectorField | None = None

    def clear(self):
        self.prev_u_d = None
        self.prev_f_d = None


@dataclass
class BetaAllocation:
    beta: np.ndarray
    integrals: np.ndarray
    controllable: bool


def _repulsion(targets: np.ndarray, sources: np.ndarray, gain: float, min_distance: float, mask=None) -> np.ndarray:
    # -grad_{r} sum gain / |r - s|, distances clamped below
    diff = targets[:, None, :] - sources[None, :, :]
    d = np.linalg.norm(diff, axis=-1)
    dc = np.maximum(d, min_distance)
    unit = diff / np.where(d > 0, d, 1.0)[..., None]
    mag = gain / (dc * dc)
    if mask is not None:
        mag = np.where(mask, mag, 0.0)
    return np.sum(unit * mag[..., None], axis=1)


def wall_points(positions: np.ndarray, domain: Domain) -> np.ndarray:
    """Nearest point on each of the four walls, shape ``(n, 4, 2)``."""
    lo, hi = np.asarray(domain.lower), np.asarray(domain.upper)
    p = np.clip(positions, lo, hi)
    out = np.repeat(p[:, None, :], 4, axis=1)
    out[:, 0, 0] = lo[0]
    out[:, 1, 0] = hi[0]
    out[:, 2, 1] = lo[1]
    out[:, 3, 1] = hi[1]
    return out


def position_controls(
    robots: RobotTeamState, obstacle_centers, params: PositionControlParams, domain: Domain | None = None
) -> np.ndarray:
    """Accelerations ``tau_i = (f_i - nu * rdot_i) / m_i`` for all robots.

    Other robots always repel; obstacle centers repel when within the
    sensing radius. With ``walls_as_obstacles`` and a ``domain``, the
    nearest point of each wall is treated as one more sensed obstacle.
    """
    r = robots.positions
    n = len(r)
    f = np.zeros_like(r)
    if n > 1:
        f += _repulsion(r, r, params.k_robot, params.min_distance, mask=~np.eye(n, dtype=bool))
    obs = np.asarray(obstacle_centers, dtype=float).reshape(-1, 2)
    if len(obs):
        seen = np.linalg.norm(r[:, None, :] - obs[None, :, :], axis=-1) <= params.sensing_radius
        f += _repulsion(r, obs, params.k_obstacle, params.min_distance, mask=seen)
    if params.walls_as_obstacles and domain is not None:
        walls = wall_points(r, domain)
        diff = r[:, None, :] - walls
        d = np.linalg.norm(diff, axis=-1)
        dc = np.maximum(d, params.min_distance)
        mag = np.where(d <= params.sensing_radius, params.k_obstacle / (dc * dc), 0.0)
        normals = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        f += np.sum(normals[None] * mag[..., None], axis=1)
    return (f - params.viscosity * robots.velocities) / robots.masses[:, None]


def position_control(
    i: int, robots: RobotTeamState, obstacle_centers, params: PositionControlParams, domain: Domain | None = None
) -> np.ndarray:
    return position_controls(robots, obstacle_centers, params, domain)[i]


def virtual_velocity(rho: ScalarField, rho_star: ScalarField, params: DirectionControlParams) -> VectorField:
    """Normalized density feedback ``u_d = -k' grad(rho - rho*) / (|grad| + eps)``."""
    g = gradient(rho - rho_star)
    scale = params.k_rho / (g.norm() + params.grad_eps)
    return VectorField(rho.domain, -g.values * scale)


def approximator_predict(approx: AdaptiveApproximator, domain: Domain | None = None) -> VectorField:
    domain = domain or approx.domain
    if domain != approx.domain:
        raise InvalidConfigError("approximator was built for a different grid")
    m = approx.size
    feats = approx.features()
    gx = np.tensordot(approx.weights[:m], feats, axes=1)
    gy = np.tensordot(approx.weights[m:], feats, axes=1)
    return VectorField(domain, np.stack([gx, gy]))


def update_weights(approx: AdaptiveApproximator, u_tilde: VectorField, dt: float) -> np.ndarray:
    """One forward-Euler step of ``w' = Gamma (int phi u_tilde dx - k_w w)``."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    drive = integrate_vector_weighted(approx.features(), u_tilde)
    p = approx.params
    return approx.weights + dt * p.gain * (drive - p.leakage * approx.weights)


def desired_force(
    rho: ScalarField,
    rho_star: ScalarField,
    u: VectorField,
    u_tilde: VectorField,
    du_d_dt: VectorField,
    g_hat: VectorField,
    potential: InteractionPotentialParams,
    params: DirectionControlParams,
) -> VectorField:
    """Stabilizing force field

    ``F_d = -k_u u~ - rho grad rho~ + (u.grad)u + gradU*rho - phi^T w + d_t u_d``.
    """
    grad_err = gradient(rho - rho_star).values
    out = (
        -params.k_u * u_tilde.values
        - rho.values * grad_err
        + advection(u).values
        + interaction_convolution(rho, potential).values
        - g_hat.values
        + du_d_dt.values
    )
    return VectorField(rho.domain, out)


def _kernel_matrix(domain: Domain, robots: RobotTeamState, kernel: NavigationKernelParams):
    nodes = domain.nodes()
    xi = nodes[:, None, :] - robots.positions[None, :, :]
    return xi, navigation_kernel(xi, kernel)


def beta_weights(
    f_tilde: VectorField,
    robots: RobotTeamState,
    kernel: NavigationKernelParams,
    params: DirectionControlParams,
) -> BetaAllocation:
    """Equal shares ``1/n'`` over robots that can still rotate ``F~``.

    ``integrals[i]`` is ``int_{Omega_i} F~ . F_theta^i dx``; robot ``i`` is
    active when its magnitude exceeds ``denom_eps``.
    """
    _, k = _kernel_matrix(f_tilde.domain, robots, kernel)
    head = robots.headings()
    ft = f_tilde.values.reshape(2, -1)
    proj = ft[0][:, None] * (-head[:, 1])[None, :] + ft[1][:, None] * head[:, 0][None, :]
    integrals = np.sum(k * proj, axis=0) * f_tilde.domain.cell_area
    return allocate_beta(integrals, params.denom_eps)


def allocate_beta(integrals, eps: float) -> BetaAllocation:
    """``beta_i = 1/n'`` where ``|I_i| > eps``, zero elsewhere."""
    integrals = np.asarray(integrals, dtype=float)
    active = np.abs(integrals) > eps
    count = int(active.sum())
    beta = np.where(active, 1.0 / count, 0.0) if count else np.zeros(len(integrals))
    return BetaAllocation(beta, integrals, count > 0)


def sign_field_transport(domain: Domain, robots: RobotTeamState, kernel: NavigationKernelParams) -> VectorField:
    """``sum_i F_xi^i rdot_i`` on the grid: the change of ``F`` due to robot motion."""
    xi, _ = _kernel_matrix(domain, robots, kernel)
    dk = kernel_gradient(xi, kernel)  # (M, n, 2)
    rate = np.einsum("mnk,nk->mn", dk, robots.velocities)
    out = rate @ robots.headings()  # (M, 2)
    r = domain.resolution
    return VectorField(domain, out.T.reshape(2, r, r))


def direction_rates(
    f_tilde: VectorField,
    df_d_dt: VectorField,
    u_tilde: VectorField,
    robots: RobotTeamState,
    allocation: BetaAllocation,
    kernel: NavigationKernelParams,
    params: DirectionControlParams,
) -> np.ndarray:
    """Turning rates ``eta_i``, saturated to ``[-max_rate, max_rate]``."""
    n = robots.count
    eta = np.zeros(n)
    if not allocation.controllable:
        return eta
    h2 = f_tilde.domain.cell_area
    drift = u_tilde.values - df_d_dt.values - sign_field_transport(f_tilde.domain, robots, kernel).values
    shared = float(np.sum(f_tilde.values * drift)) * h2
    energy = float(np.sum(f_tilde.values**2)) * h2
    for i in range(n):
        b = allocation.beta[i]
        if b <= 0:
            continue
        denom = allocation.integrals[i]
        if abs(denom) <= params.denom_eps:
            raise ControllerInconsistencyError(f"robot {i} is active but its integral is {denom!r}")
        eta[i] = -(b * shared + params.k_eta * energy) / denom
    return np.clip(eta, -params.max_rate, params.max_rate)

