"""Run configuration and the flat ``key = value`` file format.

One assignment per line, ``#`` starts a comment, parameter groups use
dotted keys::

    humans = 250
    regime = static
    control.k_u = 0.2
    target.safe_location = 0.8125, 0.5

Omitted keys keep their defaults; unknown keys are rejected. Sweep files
add ``sweep.*`` keys on top of a base run configuration.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields, replace
from typing import Any

from .control import AdaptiveParams, DirectionControlParams, PositionControlParams
from .domain import Domain, InvalidConfigError, TargetDensity
from .estimation import KdeConfig, VelocityEstimatorConfig
from .forces import REGIMES, EnvForceParams, InteractionPotentialParams, NavigationKernelParams


class ConfigError(InvalidConfigError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class SimConfig:
    humans: int = 250
    robots: int = 16
    dt: float = 0.1
    horizon: float = 80.0
    regime: str = "none"
    obstacles: int = 5
    seed: int = 0
    evac_radius: float = 0.15
    stop_threshold: float = 0.0
    domain: Domain = field(default_factory=Domain)
    target: TargetDensity = field(default_factory=TargetDensity)
    potential: InteractionPotentialParams = field(default_factory=InteractionPotentialParams)
    kernel: NavigationKernelParams = field(default_factory=NavigationKernelParams)
    env: EnvForceParams = field(default_factory=EnvForceParams)
    kde: KdeConfig = field(default_factory=KdeConfig)
    velocity: VelocityEstimatorConfig = field(default_factory=VelocityEstimatorConfig)
    position: PositionControlParams = field(default_factory=PositionControlParams)
    control: DirectionControlParams = field(default_factory=DirectionControlParams)
    adaptive: AdaptiveParams = field(default_factory=AdaptiveParams)

    def __post_init__(self):
        if self.humans < 1:
            raise InvalidConfigError("humans must be positive")
        if self.robots < 1:
            raise InvalidConfigError("robots must be positive")
        if not self.dt > 0:
            raise InvalidConfigError("dt must be positive")
        if self.horizon < 0:
            raise InvalidConfigError("horizon must be non-negative")
        if self.regime not in REGIMES:
            raise InvalidConfigError(f"regime must be one of {', '.join(REGIMES)}")
        if self.obstacles < 0:
            raise InvalidConfigError("obstacles must be non-negative")
        if not self.evac_radius > 0:
            raise InvalidConfigError("evac_radius must be positive")
        if self.stop_threshold < 0:
            raise InvalidConfigError("stop_threshold must be non-negative")
        if self.seed < 0:
            raise InvalidConfigError("seed must be non-negative")

    @property
    def iterations(self) -> int:
        """Number of steps needed to reach the horizon."""
        n = self.horizon / self.dt
        return int(round(n)) if abs(n - round(n)) < 1e-9 else int(n) + 1


@dataclass(frozen=True)
class ExperimentSpec:
    humans: tuple[int, ...] = (50, 100, 150, 200, 250)
    robots: tuple[int, ...] = (4, 6, 8, 10, 12, 14, 16)
    regimes: tuple[str, ...] = REGIMES
    replications: int = 128
    seed: int = 0
    output: str = "results"
    snapshots: int = 0
    base: SimConfig = field(default_factory=SimConfig)

    def __post_init__(self):
        if self.replications < 1:
            raise InvalidConfigError("replications must be >= 1")
        if not self.humans or any(v < 1 for v in self.humans):
            raise InvalidConfigError("human counts must be positive")
        if not self.robots or any(v < 1 for v in self.robots):
            raise InvalidConfigError("robot counts must be positive")
        if not self.regimes or any(r not in REGIMES for r in self.regimes):
            raise InvalidConfigError(f"regimes must be drawn from {', '.join(REGIMES)}")
        if self.snapshots < 0:
            raise InvalidConfigError("snapshot cadence must be >= 0")

    def cells(self) -> list[tuple[int, int, str]]:
        return [(h, r, g) for h in self.humans for r in self.robots for g in self.regimes]


_SWEEP_KEYS = ("humans", "robots", "regimes", "replications", "seed", "output", "snapshots")


def _coerce(raw: str, template: Any):
    raw = raw.strip()
    if isinstance(template, bool):
        low = raw.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if isinstance(template, int):
        return int(raw)
    if isinstance(template, float):
        return float(raw)
    if isinstance(template, str):
        if not raw:
            raise ValueError("expected a non-empty string")
        return raw
    if isinstance(template, tuple):
        parts = [p for p in (s.strip() for s in raw.split(",")) if p]
        if not parts:
            raise ValueError("expected a comma-separated list")
        inner = template[0] if template else ""
        return tuple(_coerce(p, inner) for p in parts)
    raise TypeError(f"unsupported field type {type(template).__name__}")


def _split_lines(text: str):
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, value = body.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError("missing key", line=lineno)
        yield lineno, key, value.strip()


def _apply(cfg: SimConfig, assignments: list[tuple[int | None, str, str]]) -> SimConfig:
    top: dict[str, Any] = {}
    groups: dict[str, dict[str, Any]] = {}
    group_names = {f.name for f in fields(SimConfig) if dataclasses.is_dataclass(getattr(cfg, f.name))}
    scalar_names = {f.name for f in fields(SimConfig)} - group_names
    for lineno, key, raw in assignments:
        parts = key.split(".")
        try:
            if len(parts) == 1 and parts[0] in scalar_names:
                top[key] = _coerce(raw, getattr(cfg, key))
            elif len(parts) == 2 and parts[0] in group_names:
                group = getattr(cfg, parts[0])
                if parts[1] not in {f.name for f in fields(group)}:
                    raise ConfigError("unknown key", line=lineno, key=key)
                groups.setdefault(parts[0], {})[parts[1]] = _coerce(raw, getattr(group, parts[1]))
            else:
                raise ConfigError("unknown key", line=lineno, key=key)
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value {raw!r}: {exc}", line=lineno, key=key) from None
    try:
        return _build(cfg, top, groups)
    except ConfigError:
        raise
    except InvalidConfigError as exc:
        # locate the first assignment that is invalid on its own
        for lineno, key, raw in assignments:
            parts = key.split(".")
            try:
                if len(parts) == 1:
                    _build(cfg, {key: top[key]}, {})
                else:
                    _build(cfg, {}, {parts[0]: {parts[1]: groups[parts[0]][parts[1]]}})
            except InvalidConfigError as single:
                raise ConfigError(str(single), line=lineno, key=key) from None
        raise ConfigError(str(exc)) from None


def _build(cfg: SimConfig, top: dict[str, Any], groups: dict[str, dict[str, Any]]) -> SimConfig:
    top = dict(top)
    for name, values in groups.items():
        top[name] = replace(getattr(cfg, name), **values)
    return replace(cfg, **top)


def parse_overrides(pairs: list[str]) -> list[tuple[None, str, str]]:
    out = []
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not key=value")
        k, v = pair.split("=", 1)
        out.append((None, k.strip(), v.strip()))
    return out


def parse_config(text: str, overrides: list[str] = (), base: SimConfig | None = None) -> SimConfig:
    """Parse a run configuration; ``overrides`` are extra ``key=value`` strings."""
    assignments = list(_split_lines(text)) + parse_overrides(list(overrides))
    for lineno, key, _ in assignments:
        if key.startswith("sweep."):
            raise ConfigError("sweep keys belong in an experiment file", line=lineno, key=key)
    return _apply(base or SimConfig(), assignments)


def parse_experiment(text: str, overrides: list[str] = ()) -> ExperimentSpec:
    assignments = list(_split_lines(text)) + parse_overrides(list(overrides))
    sweep: dict[str, Any] = {}
    rest = []
    template = ExperimentSpec()
    for lineno, key, raw in assignments:
        if key.startswith("sweep."):
            name = key[len("sweep."):]
            if name not in _SWEEP_KEYS:
                raise ConfigError("unknown key", line=lineno, key=key)
            try:
                sweep[name] = _coerce(raw, getattr(template, name))
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"bad value {raw!r}: {exc}", line=lineno, key=key) from None
        else:
            rest.append((lineno, key, raw))
    base = _apply(SimConfig(), rest)
    try:
        return ExperimentSpec(base=base, **sweep)
    except InvalidConfigError as exc:
        raise ConfigError(str(exc)) from None


def _render(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_render(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def dump_config(cfg: SimConfig) -> str:
    """Every effective setting as ``key = value`` lines; re-parses to ``cfg``."""
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if dataclasses.is_dataclass(value):
            for g in fields(value):
                lines.append(f"{f.name}.{g.name} = {_render(getattr(value, g.name))}")
        else:
            lines.append(f"{f.name} = {_render(value)}")
    return "\n".join(lines) + "\n"


def dump_experiment(spec: ExperimentSpec) -> str:
    lines = [f"sweep.{k} = {_render(getattr(spec, k))}" for k in _SWEEP_KEYS]
    return "\n".join(lines) + "\n" + dump_config(spec.base)
