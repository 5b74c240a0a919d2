"""Time stepping for the robot-guided evacuation loop.

Each iteration estimates the crowd macrostates from the particles,
evaluates the controllers on the grid, then advances robots and humans
with semi-implicit Euler and projects both back into the domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .config import SimConfig
from .control import (
    AdaptiveApproximator,
    BetaAllocation,
    ControllerMemory,
    approximator_predict,
    beta_weights,
    desired_force,
    direction_rates,
    position_controls,
    update_weights,
    virtual_velocity,
)
from .domain import (
    Domain,
    HumanCrowdState,
    ObstacleSet,
    RobotTeamState,
    RunSeeds,
    init_humans_uniform,
    init_robots_corner_array,
    place_obstacles,
    target_density_field,
)
from .estimation import kde_density, kernel_weights, velocity_field_estimate
from .fields import ScalarField, VectorField, l2_norm, time_derivative
from .forces import env_force, navigation_force, navigation_force_field, pairwise_human_forces

METRIC_COLUMNS = (
    "t",
    "density_err",
    "velocity_err",
    "force_err",
    "weight_norm",
    "lyapunov",
    "evac_rate",
    "mean_speed",
)


class SimulationDiverged(RuntimeError):
    def __init__(self, iteration: int, what: str = "state"):
        self.iteration = iteration
        super().__init__(f"non-finite {what} at iteration {iteration}")


@dataclass
class FieldCache:
    """Macrostates and controller fields evaluated at one instant."""

    rho: ScalarField
    u: VectorField
    u_d: VectorField
    du_d: VectorField
    u_tilde: VectorField
    g_hat: VectorField
    f_d: VectorField
    df_d: VectorField
    nav: VectorField
    f_tilde: VectorField
    rho_err: ScalarField


@dataclass
class SimState:
    iteration: int
    dt: float
    humans: HumanCrowdState
    robots: RobotTeamState
    obstacles: ObstacleSet
    approximator: AdaptiveApproximator
    memory: ControllerMemory
    rho_star: ScalarField
    cache: FieldCache | None = None

    @property
    def t(self) -> float:
        return self.iteration * self.dt


@dataclass
class RunMetrics:
    rows: list[tuple[float, ...]] = field(default_factory=list)
    robot_positions: list[np.ndarray] = field(default_factory=list)
    robot_directions: list[np.ndarray] = field(default_factory=list)
    seed: int = 0

    columns = METRIC_COLUMNS

    def column(self, name: str) -> np.ndarray:
        k = self.columns.index(name)
        return np.array([row[k] for row in self.rows])

    @property
    def final(self) -> dict[str, float]:
        return dict(zip(self.columns, self.rows[-1]))

    def row_at(self, t: float) -> dict[str, float]:
        ts = self.column("t")
        k = int(np.argmin(np.abs(ts - t)))
        return dict(zip(self.columns, self.rows[k]))


def evacuation_rate(positions, safe_location, radius: float) -> float:
    """Percentage of humans within the closed disk around the safe location."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    p = np.asarray(positions, dtype=float).reshape(-1, 2)
    d2 = np.sum((p - np.asarray(safe_location, dtype=float)) ** 2, axis=1)
    inside = d2 <= radius * radius * (1 + 1e-12)
    return 100.0 * float(np.count_nonzero(inside)) / len(p)


def coverage_fraction(robot_positions, domain: Domain, radius: float) -> float:
    """Fraction of grid nodes within ``radius`` of at least one robot."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    r = np.asarray(robot_positions, dtype=float).reshape(-1, 2)
    if len(r) == 0:
        return 0.0
    nodes = domain.nodes()
    d2 = np.sum((nodes[:, None, :] - r[None, :, :]) ** 2, axis=-1)
    return float(np.mean(np.any(d2 <= radius * radius, axis=1)))


def project_to_domain(positions: np.ndarray, velocities: np.ndarray, domain: Domain):
    """Clamp positions into the domain and zero outward velocity on the boundary."""
    lo, hi = np.asarray(domain.lower), np.asarray(domain.upper)
    p = np.clip(positions, lo, hi)
    v = velocities.copy()
    v[(p <= lo) & (v < 0)] = 0.0
    v[(p >= hi) & (v > 0)] = 0.0
    return p, v


def initial_state(config: SimConfig) -> SimState:
    seeds = RunSeeds.from_seed(config.seed)
    dom = config.domain
    humans = init_humans_uniform(config.humans, dom, seeds.humans)
    robots = init_robots_corner_array(config.robots, dom, seeds.robots)
    if config.regime == "none":
        obstacles = ObstacleSet()
    else:
        obstacles = place_obstacles(
            config.obstacles,
            dom,
            seeds.obstacles,
            dynamic=config.regime == "dynamic",
            keep_clear=config.target.safe_location,
            clear_radius=config.evac_radius,
        )
    return SimState(
        iteration=0,
        dt=config.dt,
        humans=humans,
        robots=robots,
        obstacles=obstacles,
        approximator=AdaptiveApproximator(dom, config.adaptive),
        memory=ControllerMemory(),
        rho_star=target_density_field(config.target, dom),
    )


def observe(state: SimState, config: SimConfig) -> FieldCache:
    """Estimate macrostates and evaluate controller fields at ``state.t``."""
    dom = config.domain
    x, v = state.humans.positions, state.humans.velocities
    w_rho = kernel_weights(dom.nodes(), x, config.kde.bandwidth)
    w_u = w_rho if config.velocity.bandwidth == config.kde.bandwidth else None
    rho = kde_density(x, config.kde, dom, weights=w_rho)
    u = velocity_field_estimate(x, v, config.velocity, dom, weights=w_u)

    u_d = virtual_velocity(rho, state.rho_star, config.control)
    du_d = time_derivative(state.memory.prev_u_d, u_d, state.dt)
    u_tilde = u - u_d
    if config.adaptive.enabled:
        g_hat = approximator_predict(state.approximator)
    else:
        g_hat = VectorField.zeros(dom)
    f_d = desired_force(rho, state.rho_star, u, u_tilde, du_d, g_hat, config.potential, config.control)
    df_d = time_derivative(state.memory.prev_f_d, f_d, state.dt)
    nav = navigation_force_field(state.robots, dom, config.kernel)
    return FieldCache(
        rho=rho,
        u=u,
        u_d=u_d,
        du_d=du_d,
        u_tilde=u_tilde,
        g_hat=g_hat,
        f_d=f_d,
        df_d=df_d,
        nav=nav,
        f_tilde=nav - f_d,
        rho_err=rho - state.rho_star,
    )


def metrics_row(state: SimState, config: SimConfig) -> tuple[float, ...]:
    c = state.cache
    e_rho = l2_norm(c.rho_err)
    e_u = l2_norm(c.u_tilde)
    e_f = l2_norm(c.f_tilde)
    return (
        state.t,
        e_rho,
        e_u,
        e_f,
        float(np.linalg.norm(state.approximator.weights)),
        0.5 * (e_rho**2 + e_u**2 + e_f**2),
        evacuation_rate(state.humans.positions, config.target.safe_location, config.evac_radius),
        float(np.mean(np.linalg.norm(state.humans.velocities, axis=1))),
    )


def _check_finite(state: SimState):
    arrays = [
        state.humans.positions,
        state.humans.velocities,
        state.robots.positions,
        state.robots.velocities,
        state.robots.directions,
        state.approximator.weights,
    ]
    if not all(np.all(np.isfinite(a)) for a in arrays):
        raise SimulationDiverged(state.iteration)
    c = state.cache
    if c is not None and not (c.rho.is_finite() and c.f_d.is_finite() and c.f_tilde.is_finite()):
        raise SimulationDiverged(state.iteration, "field")


@dataclass
class ControlOutputs:
    tau: np.ndarray
    eta: np.ndarray
    allocation: BetaAllocation
    weights: np.ndarray


def compute_controls(state: SimState, config: SimConfig) -> ControlOutputs:
    c = state.cache
    t = state.t
    allocation = beta_weights(c.f_tilde, state.robots, config.kernel, config.control)
    eta = direction_rates(c.f_tilde, c.df_d, c.u_tilde, state.robots, allocation, config.kernel, config.control)
    tau = position_controls(state.robots, state.obstacles.centers(t), config.position, config.domain)
    if config.adaptive.enabled:
        weights = update_weights(state.approximator, c.u_tilde, state.dt)
    else:
        weights = state.approximator.weights
    return ControlOutputs(tau, eta, allocation, weights)


def step(state: SimState, config: SimConfig) -> SimState:
    """Advance one iteration; the input state is left untouched."""
    if state.cache is None:
        state = replace(state, cache=observe(state, config))
    t, dt, dom = state.t, state.dt, config.domain
    ctrl = compute_controls(state, config)

    robots = state.robots
    r_vel = robots.velocities + dt * ctrl.tau
    r_pos = robots.positions + dt * r_vel
    theta = robots.directions + dt * ctrl.eta
    r_pos, r_vel = project_to_domain(r_pos, r_vel, dom)

    x, v = state.humans.positions, state.humans.velocities
    accel = (
        pairwise_human_forces(x, config.potential)
        + env_force(x, t, state.obstacles.centers(t), config.env, config.regime)
        + navigation_force(x, robots, config.kernel)
    )
    v_new = v + dt * accel
    x_new, v_new = project_to_domain(x + dt * v_new, v_new, dom)

    approx = state.approximator.copy()
    approx.weights = ctrl.weights
    new = SimState(
        iteration=state.iteration + 1,
        dt=dt,
        humans=HumanCrowdState(x_new, v_new),
        robots=RobotTeamState(r_pos, r_vel, theta, robots.masses.copy()),
        obstacles=state.obstacles,
        approximator=approx,
        memory=ControllerMemory(prev_u_d=state.cache.u_d, prev_f_d=state.cache.f_d),
        rho_star=state.rho_star,
    )
    _check_finite(new)
    new.cache = observe(new, config)
    _check_finite(new)
    return new


def run(
    config: SimConfig,
    on_step: Callable[[SimState], None] | None = None,
    keep_robot_trace: bool = True,
) -> RunMetrics:
    """Iterate until the horizon or until the density error drops to the threshold."""
    state = initial_state(config)
    state.cache = observe(state, config)
    _check_finite(state)
    metrics = RunMetrics(seed=config.seed)

    def record(s: SimState):
        metrics.rows.append(metrics_row(s, config))
        if keep_robot_trace:
            metrics.robot_positions.append(s.robots.positions.copy())
            metrics.robot_directions.append(s.robots.directions.copy())
        if on_step is not None:
            on_step(s)

    record(state)
    total = config.iterations
    while state.iteration < total and metrics.rows[-1][1] > config.stop_threshold:
        state = step(state, config)
        record(state)
    return metrics


def headline_iteration_time(config: SimConfig, iterations: int = 50) -> float:
    """Mean wall time per iteration in seconds over a short run."""
    import time

    state = initial_state(config)
    state.cache = observe(state, config)
    start = time.perf_counter()
    for _ in range(iterations):
        state = step(state, config)
    return (time.perf_counter() - start) / iterations

