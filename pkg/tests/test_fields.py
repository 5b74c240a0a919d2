import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from crowdguide.domain import Domain
from crowdguide.fields import (
    GridMismatchError,
    ScalarField,
    VectorField,
    advection,
    divergence,
    gradient,
    integrate,
    integrate_vector_weighted,
    interaction_convolution,
    l2_norm,
    sample,
    time_derivative,
)
from crowdguide.forces import InteractionPotentialParams, grad_U

DOM = Domain()
SMALL = Domain(resolution=10)
POT = InteractionPotentialParams()
INNER = (slice(1, -1), slice(1, -1))
# plain node sum over the closed unit square: (R / (R - 1))^2 instead of 1
QUAD = (30 / 29) ** 2

finite = st.floats(-10, 10, allow_nan=False)


def grid_values(shape=(30, 30)):
    return arrays(np.float64, shape, elements=finite)


def test_gradient_of_constant_is_zero():
    g = gradient(ScalarField(DOM, np.full((30, 30), 3.7)))
    assert np.array_equal(g.values, np.zeros((2, 30, 30)))


def test_gradient_of_x_is_exact():
    g = gradient(ScalarField.from_function(DOM, lambda x, y: x))
    assert np.allclose(g.x, 1.0, atol=1e-12) and np.allclose(g.y, 0.0, atol=1e-12)


def _gauss_error(res):
    dom = Domain(resolution=res)
    c, s = 0.5, 0.15
    f = ScalarField.from_function(dom, lambda x, y: np.exp(-((x - c) ** 2 + (y - c) ** 2) / (2 * s * s)))
    gx, gy = dom.mesh()
    exact = np.stack([-(gx - c) / s**2, -(gy - c) / s**2]) * f.values
    return np.max(np.abs(gradient(f).values - exact)[(slice(None), *INNER)])


def test_gradient_second_order_interior():
    e30, e60 = _gauss_error(30), _gauss_error(60)
    assert e30 / e60 >= 3.5


def test_boundary_stencil_is_one_sided():
    f = ScalarField.from_function(DOM, lambda x, y: x**2)
    h = DOM.spacing[0]
    g = gradient(f)
    assert np.allclose(g.x[0], h**2 / h)


def test_divergence_examples():
    assert np.allclose(divergence(VectorField(DOM, np.ones((2, 30, 30)))).values, 0)
    v = VectorField.from_function(DOM, lambda x, y: (x, y))
    assert np.allclose(divergence(v).values[INNER], 2.0)


def test_laplacian_of_quadratic_exact_inside():
    f = ScalarField.from_function(DOM, lambda x, y: 3 * x**2 - x * y + 2 * y**2)
    lap = divergence(gradient(f)).values[2:-2, 2:-2]
    assert np.allclose(lap, 10.0, atol=1e-9)


def test_advection_examples():
    assert np.allclose(advection(VectorField(DOM, np.full((2, 30, 30), 0.4))).values, 0)
    u = VectorField.from_function(DOM, lambda x, y: (x, 0 * y))
    gx, _ = DOM.mesh()
    a = advection(u)
    assert np.allclose(a.x, gx) and np.allclose(a.y, 0)


def test_advection_is_quadratic():
    u = VectorField.from_function(DOM, lambda x, y: (0.3 * x - y, 2 * y + 0.1))
    assert np.allclose(advection(u * 2).values, 4 * advection(u).values)


def _convolution_loop(rho):
    dom = rho.domain
    nodes = dom.nodes()
    vals = rho.values.ravel()
    out = np.zeros((len(nodes), 2))
    for a in range(len(nodes)):
        for b in range(len(nodes)):
            out[a] += grad_U(nodes[a] - nodes[b], POT) * vals[b] * dom.cell_area
    return out


def test_convolution_matches_double_loop():
    rng = np.random.default_rng(4)
    rho = ScalarField(SMALL, rng.random((10, 10)))
    fast = interaction_convolution(rho, POT).values.reshape(2, -1).T
    assert np.max(np.abs(fast - _convolution_loop(rho))) <= 1e-12


def test_convolution_of_zero_and_point_mass():
    assert np.array_equal(interaction_convolution(ScalarField.zeros(SMALL), POT).values, np.zeros((2, 10, 10)))
    vals = np.zeros((10, 10))
    vals[3, 6] = 1.0
    conv = interaction_convolution(ScalarField(SMALL, vals), POT)
    nodes = SMALL.nodes()
    src = nodes[3 * 10 + 6]
    expected = grad_U(nodes - src, POT) * SMALL.cell_area
    assert np.allclose(conv.values.reshape(2, -1).T, expected, rtol=0, atol=1e-15)


@given(grid_values((10, 10)), grid_values((10, 10)), finite, finite)
def test_convolution_linear(r1, r2, a, b):
    f1, f2 = ScalarField(SMALL, r1), ScalarField(SMALL, r2)
    lhs = interaction_convolution(f1 * a + f2 * b, POT).values
    rhs = a * interaction_convolution(f1, POT).values + b * interaction_convolution(f2, POT).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * (1 + np.max(np.abs(rhs)))


def test_l2_norm_examples():
    assert l2_norm(ScalarField.zeros(DOM)) == 0
    assert np.isclose(l2_norm(ScalarField(DOM, np.full((30, 30), -2.0))), 2.0 * np.sqrt(QUAD))


@given(grid_values(), grid_values(), finite)
def test_l2_norm_axioms(a, b, c):
    f, g = ScalarField(DOM, a), ScalarField(DOM, b)
    assert l2_norm(f + g) <= l2_norm(f) + l2_norm(g) + 1e-9
    assert np.isclose(l2_norm(f * c), abs(c) * l2_norm(f))
    assert (l2_norm(f) == 0) == (not np.any(a))


def test_integrate_one():
    assert np.isclose(integrate(ScalarField(DOM, np.ones((30, 30)))), QUAD)


def test_weighted_integral_examples():
    m = 3
    assert np.array_equal(integrate_vector_weighted(np.ones((m, 30, 30)), VectorField.zeros(DOM)), np.zeros(2 * m))
    feats = np.zeros((m, 30, 30))
    feats[0] = 1.0
    v = VectorField(DOM, np.stack([np.ones((30, 30)), np.zeros((30, 30))]))
    out = integrate_vector_weighted(feats, v) / QUAD
    assert np.allclose(out, [1, 0, 0, 0, 0, 0])


def test_weighted_integral_grid_mismatch():
    with pytest.raises(GridMismatchError):
        integrate_vector_weighted(np.ones((2, 10, 10)), VectorField.zeros(DOM))


def test_sample_examples():
    rng = np.random.default_rng(0)
    f = ScalarField(DOM, rng.random((30, 30)))
    nodes = DOM.nodes()
    assert np.allclose(sample(f, nodes), f.values.ravel())
    h = DOM.spacing[0]
    mid = sample(f, [4.5 * h, 7.5 * h])
    assert np.isclose(mid, f.values[4:6, 7:9].mean())


@given(st.floats(0, 1), st.floats(0, 1))
def test_sample_exact_on_linear(x, y):
    f = ScalarField.from_function(DOM, lambda a, b: 2 * a - 3 * b + 1)
    assert np.isclose(sample(f, [x, y]), 2 * x - 3 * y + 1, atol=1e-12)
    v = VectorField.from_function(DOM, lambda a, b: (a, b))
    assert np.allclose(sample(v, [x, y]), [x, y], atol=1e-12)


def test_sample_continuous_across_cells():
    rng = np.random.default_rng(1)
    f = ScalarField(DOM, rng.random((30, 30)))
    edge = 5 * DOM.spacing[0]
    left, right = sample(f, [edge - 1e-12, 0.3]), sample(f, [edge + 1e-12, 0.3])
    assert abs(left - right) < 1e-9


def test_time_derivative_examples():
    rng = np.random.default_rng(2)
    prev = VectorField(DOM, rng.random((2, 30, 30)))
    g = VectorField(DOM, rng.random((2, 30, 30)))
    assert np.array_equal(time_derivative(prev, prev, 0.1).values, np.zeros((2, 30, 30)))
    assert np.allclose(time_derivative(prev, prev + g * 0.1, 0.1).values, g.values)
    assert np.array_equal(time_derivative(None, prev, 0.1).values, np.zeros((2, 30, 30)))


def test_field_shape_checked():
    with pytest.raises(GridMismatchError):
        ScalarField(DOM, np.zeros((10, 10)))
    with pytest.raises(GridMismatchError):
        ScalarField(DOM, np.zeros((30, 30))) + ScalarField(SMALL, np.zeros((10, 10)))
