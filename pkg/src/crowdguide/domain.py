"""Spatial domain, agent states, obstacles and the target density."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np


class InvalidConfigError(ValueError):
    """Raised when a configuration or initializer argument is out of range."""


MotionMode = Literal["static", "horizontal", "vertical"]

#: lattice spacing and corner offset for the initial robot array
ROBOT_LATTICE_SPACING = 0.05


@dataclass(frozen=True)
class Domain:
    """Axis-aligned rectangle sampled by a node-centered grid.

    Node ``(i, j)`` sits at ``lower + (i * hx, j * hy)``; axis 0 of every
    field array runs along x and axis 1 along y.
    """

    lower: tuple[float, float] = (0.0, 0.0)
    upper: tuple[float, float] = (1.0, 1.0)
    resolution: int = 30

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if not (hi[0] > lo[0] and hi[1] > lo[1]):
            raise InvalidConfigError("domain upper corner must exceed lower corner")
        if int(self.resolution) != self.resolution or self.resolution < 4:
            raise InvalidConfigError("grid resolution must be an integer >= 4")

    @property
    def spacing(self) -> tuple[float, float]:
        n = self.resolution - 1
        return ((self.upper[0] - self.lower[0]) / n, (self.upper[1] - self.lower[1]) / n)

    @property
    def cell_area(self) -> float:
        hx, hy = self.spacing
        return hx * hy

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lower) + np.asarray(self.upper))

    @property
    def area(self) -> float:
        return (self.upper[0] - self.lower[0]) * (self.upper[1] - self.lower[1])

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        xs = np.linspace(self.lower[0], self.upper[0], self.resolution)
        ys = np.linspace(self.lower[1], self.upper[1], self.resolution)
        return xs, ys

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates as two ``(R, R)`` arrays (``indexing='ij'``)."""
        xs, ys = self.axes()
        return np.meshgrid(xs, ys, indexing="ij")

    def nodes(self) -> np.ndarray:
        """All node positions flattened to shape ``(R*R, 2)``."""
        gx, gy = self.mesh()
        return np.stack([gx.ravel(), gy.ravel()], axis=1)

    def contains(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        return np.all((p >= lo) & (p <= hi), axis=-1)


def wrap_angle(theta) -> np.ndarray:
    """Map angles into ``[0, 2 pi)``."""
    w = np.mod(np.asarray(theta, dtype=float), 2 * np.pi)
    # tiny negative inputs round up to exactly 2 pi
    return np.where(w >= 2 * np.pi, 0.0, w)


@dataclass
class HumanCrowdState:
    positions: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        self.velocities = np.asarray(self.velocities, dtype=float).reshape(-1, 2)
        if len(self.positions) == 0:
            raise InvalidConfigError("a crowd needs at least one human")
        if self.positions.shape != self.velocities.shape:
            raise InvalidConfigError("positions and velocities must have equal length")

    @property
    def count(self) -> int:
        return len(self.positions)

    def copy(self) -> HumanCrowdState:
        return HumanCrowdState(self.positions.copy(), self.velocities.copy())


@dataclass
class RobotTeamState:
    positions: np.ndarray
    velocities: np.ndarray
    directions: np.ndarray
    masses: np.ndarray | None = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        self.velocities = np.asarray(self.velocities, dtype=float).reshape(-1, 2)
        self.directions = wrap_angle(np.asarray(self.directions, dtype=float).reshape(-1))
        n = len(self.positions)
        if self.masses is None:
            self.masses = np.ones(n)
        self.masses = np.asarray(self.masses, dtype=float).reshape(-1)
        if not (len(self.velocities) == len(self.directions) == len(self.masses) == n):
            raise InvalidConfigError("robot arrays must all have length n")
        if np.any(self.masses <= 0):
            raise InvalidConfigError("robot masses must be positive")

    @property
    def count(self) -> int:
        return len(self.positions)

    def headings(self) -> np.ndarray:
        """Unit sign directions ``(cos θ, sin θ)``, shape ``(n, 2)``."""
        return np.stack([np.cos(self.directions), np.sin(self.directions)], axis=1)

    def copy(self) -> RobotTeamState:
        return RobotTeamState(
            self.positions.copy(), self.velocities.copy(), self.directions.copy(), self.masses.copy()
        )


@dataclass(frozen=True)
class Obstacle:
    base_center: tuple[float, float]
    half_extent: tuple[float, float] = (0.025, 0.025)
    mode: MotionMode = "static"
    sign: float = 1.0
    amplitude: float = 0.1
    rate: float = 0.2

    def center(self, t: float) -> np.ndarray:
        c = np.array(self.base_center, dtype=float)
        if self.mode == "horizontal":
            c[0] += self.sign * self.amplitude * math.sin(self.rate * t)
        elif self.mode == "vertical":
            c[1] += self.sign * self.amplitude * math.sin(self.rate * t)
        return c


@dataclass(frozen=True)
class ObstacleSet:
    obstacles: tuple[Obstacle, ...] = ()

    def __len__(self):
        return len(self.obstacles)

    def __iter__(self):
        return iter(self.obstacles)

    def centers(self, t: float) -> np.ndarray:
        """Obstacle centers at time ``t``, shape ``(k, 2)``."""
        if not self.obstacles:
            return np.zeros((0, 2))
        return np.stack([ob.center(t) for ob in self.obstacles])

    def half_extents(self) -> np.ndarray:
        if not self.obstacles:
            return np.zeros((0, 2))
        return np.array([ob.half_extent for ob in self.obstacles], dtype=float)


@dataclass(frozen=True)
class TargetDensity:
    safe_location: tuple[float, float] = (13 / 16, 1 / 2)
    spread: float = 0.085

    def __post_init__(self):
        object.__setattr__(self, "safe_location", tuple(float(v) for v in self.safe_location))
        if not self.spread > 0:
            raise InvalidConfigError("target spread must be positive")

    def evaluate(self, points) -> np.ndarray:
        """Unnormalized Gaussian ``exp(-|x-mu|^2 / 2 sigma^2) / (2 pi sigma)``."""
        p = np.asarray(points, dtype=float)
        d2 = np.sum((p - np.asarray(self.safe_location)) ** 2, axis=-1)
        return np.exp(-d2 / (2 * self.spread**2)) / (2 * np.pi * self.spread)


@dataclass(frozen=True)
class RunSeeds:
    """Independent RNG streams derived from one master seed."""

    humans: np.random.Generator = field(repr=False)
    robots: np.random.Generator = field(repr=False)
    obstacles: np.random.Generator = field(repr=False)

    @classmethod
    def from_seed(cls, seed: int) -> RunSeeds:
        h, r, o = np.random.SeedSequence(int(seed)).spawn(3)
        return cls(np.random.default_rng(h), np.random.default_rng(r), np.random.default_rng(o))


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def init_humans_uniform(count: int, domain: Domain, seed) -> HumanCrowdState:
    """Humans placed i.i.d. uniformly over the domain, all at rest."""
    if count < 1:
        raise InvalidConfigError(f"number of humans must be >= 1, got {count}")
    rng = _as_rng(seed)
    lo, hi = np.asarray(domain.lower), np.asarray(domain.upper)
    positions = lo + rng.random((count, 2)) * (hi - lo)
    return HumanCrowdState(positions, np.zeros((count, 2)))


def init_robots_corner_array(count: int, domain: Domain, seed=None) -> RobotTeamState:
    """Robots on a square lattice anchored at the lower-left corner.

    Lattice rows hold ``ceil(sqrt(count))`` robots; spacing and corner
    offset are both :data:`ROBOT_LATTICE_SPACING`. Directions are drawn
    uniformly from ``[0, 2 pi)``.
    """
    if count < 1:
        raise InvalidConfigError(f"number of robots must be >= 1, got {count}")
    per_row = math.ceil(math.sqrt(count))
    idx = np.arange(count)
    offsets = np.stack([idx % per_row, idx // per_row], axis=1) * ROBOT_LATTICE_SPACING
    positions = np.asarray(domain.lower) + ROBOT_LATTICE_SPACING + offsets
    positions = np.minimum(positions, np.asarray(domain.upper))
    directions = _as_rng(seed).uniform(0.0, 2 * np.pi, size=count)
    return RobotTeamState(positions, np.zeros((count, 2)), directions)


def _square_hits_disk(center, half, disk_center, radius) -> bool:
    nearest = np.clip(disk_center, center - half, center + half)
    return float(np.linalg.norm(nearest - disk_center)) <= radius


def place_obstacles(
    count: int,
    domain: Domain,
    seed,
    *,
    dynamic: bool = False,
    keep_clear: tuple[float, float] = (13 / 16, 1 / 2),
    clear_radius: float = 0.15,
    size: float = 0.05,
    amplitude: float = 0.1,
    rate: float = 0.2,
    max_tries: int = 10_000,
) -> ObstacleSet:
    """Rejection-sample square obstacles away from the evacuation disk.

    Dynamic obstacles pick an oscillation axis and sign at random; their
    whole swept path must stay inside the domain and off the disk.
    """
    if count < 0:
        raise InvalidConfigError("obstacle count must be >= 0")
    rng = _as_rng(seed)
    half = np.array([size / 2, size / 2])
    lo, hi = np.asarray(domain.lower), np.asarray(domain.upper)
    clear = np.asarray(keep_clear, dtype=float)
    placed: list[Obstacle] = []
    tries = 0
    while len(placed) < count:
        tries += 1
        if tries > max_tries:
            raise InvalidConfigError("could not place obstacles clear of the safe location")
        mode: MotionMode = "static"
        sign = 1.0
        reach = np.zeros(2)
        if dynamic:
            mode = "horizontal" if rng.random() < 0.5 else "vertical"
            sign = 1.0 if rng.random() < 0.5 else -1.0
            reach[0 if mode == "horizontal" else 1] = amplitude
        c = lo + half + reach + rng.random(2) * (hi - lo - 2 * (half + reach))
        # swept bounding box of the square over one oscillation period
        if _square_hits_disk(c, half + reach, clear, clear_radius):
            continue
        placed.append(
            Obstacle((float(c[0]), float(c[1])), (float(half[0]), float(half[1])), mode, sign, amplitude, rate)
        )
    return ObstacleSet(tuple(placed))


def target_density_field(target: TargetDensity, domain: Domain):
    """Target density on the grid, rescaled to unit grid mass over the domain."""
    from .fields import ScalarField

    if not target.spread > 0:
        raise InvalidConfigError("target spread must be positive")
    gx, gy = domain.mesh()
    values = target.evaluate(np.stack([gx, gy], axis=-1))
    values = values / (values.sum() * domain.cell_area)
    return ScalarField(domain, values)
