import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crowdguide.domain import Domain
from crowdguide.estimation import (
    EstimationError,
    KdeConfig,
    VelocityEstimatorConfig,
    kde_density,
    kernel_weights,
    velocity_field_estimate,
)

DOM = Domain()
KDE = KdeConfig()
VEL = VelocityEstimatorConfig()


def test_single_sample_peak_before_renormalization():
    node = DOM.nodes()[15 * 30 + 12]
    rho = kde_density([node], KDE, DOM, normalize=False)
    assert np.isclose(rho.values[15, 12], 1 / (2 * np.pi * 0.07**2))
    assert round(float(rho.values.max()), 2) == 32.48


@pytest.mark.parametrize("n", [1, 10, 250])
def test_kde_unit_grid_mass(n):
    x = np.random.default_rng(n).random((n, 2))
    rho = kde_density(x, KDE, DOM)
    assert abs(rho.values.sum() * DOM.cell_area - 1) <= 1e-9
    assert np.all(rho.values >= 0)


def test_kde_mirror_symmetry():
    rng = np.random.default_rng(3)
    left = rng.uniform([0.1, 0.1], [0.45, 0.9], size=(40, 2))
    right = np.column_stack([1 - left[:, 0], left[:, 1]])
    rho = kde_density(np.vstack([left, right]), KDE, DOM).values
    assert np.max(np.abs(rho - rho[::-1, :])) <= 1e-10


@given(st.integers(0, 2**32 - 1))
def test_kde_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    x = rng.random((20, 2))
    a = kde_density(x, KDE, DOM).values
    b = kde_density(x[rng.permutation(20)], KDE, DOM).values
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_kde_empty_rejected():
    with pytest.raises(EstimationError):
        kde_density(np.zeros((0, 2)), KDE, DOM)


def test_velocity_constant():
    rng = np.random.default_rng(0)
    x = rng.random((30, 2))
    u = velocity_field_estimate(x, np.tile([0.02, -0.01], (30, 1)), VEL, DOM)
    assert np.allclose(u.x, 0.02) and np.allclose(u.y, -0.01)


def test_velocity_single_human_and_fill():
    u = velocity_field_estimate([[0.1, 0.1]], [[0.3, 0.4]], VEL, DOM)
    assert np.allclose(u.values[:, 3, 3], [0.3, 0.4])
    # far nodes drop below the weight floor and take the zero fill
    assert np.array_equal(u.values[:, -1, -1], [0.0, 0.0])


def test_velocity_linear_field():
    rng = np.random.default_rng(9)
    x = rng.random((10_000, 2))
    v = np.column_stack([x[:, 0], np.zeros(len(x))])
    u = velocity_field_estimate(x, v, VEL, DOM)
    gx, _ = DOM.mesh()
    inner = (slice(5, -5), slice(5, -5))
    assert np.max(np.abs(u.x - gx)[inner]) <= VEL.bandwidth
    assert np.max(np.abs(u.x - gx)[inner]) <= 0.01


def test_velocity_inside_convex_hull_randomized():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        n = int(rng.integers(1, 40))
        x = rng.random((n, 2))
        v = rng.normal(size=(n, 2))
        u = velocity_field_estimate(x, v, VEL, DOM).values.reshape(2, -1).T
        # nodes below the weight floor carry the fill value, not an estimate
        u = u[kernel_weights(DOM.nodes(), x, VEL.bandwidth).sum(axis=1) >= VEL.min_weight]
        # every node value is a convex combination; check support functions
        dirs = rng.normal(size=(8, 2))
        proj_u = u @ dirs.T
        proj_v = v @ dirs.T
        assert np.all(proj_u <= proj_v.max(axis=0) + 1e-12)
        assert np.all(proj_u >= proj_v.min(axis=0) - 1e-12)


def test_velocity_length_mismatch():
    with pytest.raises(EstimationError):
        velocity_field_estimate([[0.1, 0.1]], [[0, 0], [1, 1]], VEL, DOM)
