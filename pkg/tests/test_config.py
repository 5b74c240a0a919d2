from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from crowdguide.config import (
    ConfigError,
    ExperimentSpec,
    SimConfig,
    dump_config,
    dump_experiment,
    parse_config,
    parse_experiment,
)
from crowdguide.control import DirectionControlParams


def test_empty_file_gives_defaults():
    cfg = parse_config("")
    assert cfg == SimConfig()
    assert (cfg.humans, cfg.robots, cfg.dt, cfg.horizon) == (250, 16, 0.1, 80.0)
    assert cfg.iterations == 800


def test_negative_humans_names_line_and_key():
    with pytest.raises(ConfigError) as info:
        parse_config("# header\nhumans = -3\n")
    assert info.value.line == 2 and info.value.key == "humans"
    assert "positive" in str(info.value)


def test_single_override():
    cfg = parse_config("control.k_u = 0.2")
    assert cfg == replace(SimConfig(), control=DirectionControlParams(k_u=0.2))


@pytest.mark.parametrize(
    "text,key",
    [
        ("humans 3", None),
        ("humnas = 3", "humnas"),
        ("control.k_x = 1", "control.k_x"),
        ("dt = fast", "dt"),
        ("robots = 2.5", "robots"),
        ("sweep.replications = 3", "sweep.replications"),
    ],
)
def test_bad_lines(text, key):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == 1 and info.value.key == key


def test_comments_tuples_and_overrides():
    cfg = parse_config("target.safe_location = 0.5, 0.25  # move it\nregime = static\n", ["seed=9"])
    assert cfg.target.safe_location == (0.5, 0.25)
    assert cfg.regime == "static" and cfg.seed == 9


def test_invariant_violation_in_group():
    with pytest.raises(ConfigError) as info:
        parse_config("humans = 10\nkde.bandwidth = 0\n")
    assert info.value.line == 2 and info.value.key == "kde.bandwidth"


@given(
    st.integers(1, 500),
    st.integers(1, 20),
    st.floats(1e-3, 1.0),
    st.sampled_from(["none", "static", "dynamic"]),
    st.floats(1e-3, 5.0),
    st.booleans(),
    st.integers(0, 2**64 - 1),
)
def test_dump_round_trip(humans, robots, dt, regime, k_u, adaptive, seed):
    cfg = parse_config(
        f"humans={humans}\nrobots={robots}\ndt={dt!r}\nregime={regime}\ncontrol.k_u={k_u!r}\n"
        f"adaptive.enabled={adaptive}\nseed={seed}"
    )
    assert parse_config(dump_config(cfg)) == cfg


def test_experiment_parse_and_round_trip():
    spec = parse_experiment("sweep.humans = 50, 250\nsweep.robots = 4\nsweep.replications = 3\nhorizon = 5\n")
    assert spec.humans == (50, 250) and spec.robots == (4,) and spec.base.horizon == 5.0
    assert len(spec.cells()) == 2 * 1 * 3
    assert parse_experiment(dump_experiment(spec)) == spec


def test_experiment_defaults_match_full_matrix():
    spec = parse_experiment("")
    assert len(spec.cells()) == 105 and spec.replications == 128


@pytest.mark.parametrize("text", ["sweep.replications = 0", "sweep.regimes = none, mud", "sweep.bogus = 1"])
def test_experiment_errors(text):
    with pytest.raises(ConfigError):
        parse_experiment(text)


def test_experiment_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(humans=(0,))
