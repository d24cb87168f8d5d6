import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skewlab.errors import NonConvergence, NoRealFixedPoint, RangeError
from skewlab.family import (
    A_MAX,
    A_MIN,
    EXAMPLE_FIBER_RADIUS,
    T_MAX,
    T_MIN,
    BiquadParams,
    LocusLabel,
    attracting_fiber_fixed_point,
    beta_fixed,
    classify_grid,
    classify_params,
    critical_points,
    curve_samples,
    per1_curve,
    preper11_b,
    preper21_a,
    rejected_branch_g,
    semiconjugacy_check,
    sumi_preset,
    superattracting_param,
)
from skewlab.julia import GridSpec


@pytest.mark.parametrize("t", [T_MIN, 0.8, 1.0, 1.3, T_MAX])
def test_per1_curve_has_parabolic_fixed_point(t):
    params = per1_curve(t)
    x = t / 2.0
    assert params(x) == pytest.approx(x)
    assert params.derivative(x) == pytest.approx(1.0)


def test_per1_curve_range():
    with pytest.raises(RangeError):
        per1_curve(0.1)
    with pytest.raises(RangeError):
        per1_curve(2.0)


@pytest.mark.parametrize("a", [A_MIN, -1.5, -1.0, -0.5, A_MAX])
def test_preper11_critical_value_is_fixed(a):
    params = BiquadParams(a=a, b=preper11_b(a))
    value = params(0.0)
    assert params(value) == pytest.approx(value)


@pytest.mark.parametrize("b", [A_MIN, -1.2, A_MAX])
def test_preper21_lands_on_fixed_point(b):
    params = BiquadParams(a=preper21_a(b), b=b)
    image = params(b)
    assert params(image) == pytest.approx(image)


def test_curve_ranges():
    with pytest.raises(RangeError):
        preper11_b(0.5)
    with pytest.raises(RangeError):
        preper21_a(-3.0)
    assert all(rejected_branch_g(b) < 0 for b in np.linspace(A_MIN, A_MAX, 50))


def test_curve_samples_shapes():
    samples = curve_samples(32)
    assert set(samples) == {"per1", "preper11", "preper21"}
    assert all(v.shape == (32, 3) for v in samples.values())


def test_critical_points():
    data = critical_points(BiquadParams(a=-1.0, b=0.5))
    assert data.points[0] == 0
    assert sorted(abs(c) for c in data.points) == pytest.approx([0.0, 1.0, 1.0])
    assert data.values[1] == pytest.approx(0.5)


@settings(max_examples=50, deadline=None)
@given(st.floats(-2.5, 2.5), st.floats(-2.5, 2.5))
def test_semiconjugacy(a, b):
    assert semiconjugacy_check(a, b, atol=1e-9)


def test_beta_fixed_chebyshev(chebyshev_params):
    beta = beta_fixed(chebyshev_params)
    assert beta.beta == pytest.approx(2.0)
    assert beta.multiplier == pytest.approx(16.0)
    assert beta.is_repelling


def test_beta_fixed_requires_real_fixed_point():
    with pytest.raises(NoRealFixedPoint):
        beta_fixed(BiquadParams(a=0.0, b=1.0))


def test_classify_params():
    assert classify_params(BiquadParams(a=-1.0, b=0.0)).label == LocusLabel.Connected
    assert classify_params(BiquadParams(a=0.0, b=1.0)).label == LocusLabel.Escaping
    # both inequalities hold with equality at the tip of the locus
    assert classify_params(BiquadParams(a=-2.0, b=-2.0)).label == LocusLabel.Connected
    # p(0) = beta = 1 exactly, lower bound slack
    assert classify_params(BiquadParams(a=-0.5, b=0.75)).label == LocusLabel.BoundaryWithinTol


def test_classify_params_near_boundary():
    # p(0) overshoots beta by about 1e-10
    near = classify_params(BiquadParams(a=-2.0, b=-2.0 + 1e-10))
    assert near.label == LocusLabel.BoundaryWithinTol
    assert classify_params(BiquadParams(a=-2.0, b=-2.0 + 1e-6)).label == LocusLabel.Escaping


def test_classify_params_reports_escaping_points():
    result = classify_params(BiquadParams(a=-1.0, b=1.0))
    assert result.label == LocusLabel.Escaping
    assert len(result.escaping) >= 1


def test_classify_grid():
    spec = GridSpec.box(-2.0, 0.0, -2.0, 1.0, 21, 31)
    grid = classify_grid(spec, maxiter=100, threads=2)
    assert grid.labels.shape == (31, 21)
    assert (grid.labels == LocusLabel.Escaping).any()
    assert (grid.labels == LocusLabel.Connected).any()


def test_classify_grid_escaping_grows_with_maxiter():
    spec = GridSpec.box(-2.0, 1.0, -2.0, 1.0, 31, 31)
    short = classify_grid(spec, maxiter=20).labels == LocusLabel.Escaping
    long = classify_grid(spec, maxiter=200).labels == LocusLabel.Escaping
    assert short.any()
    assert not (short & ~long).any()


@pytest.mark.parametrize("n", [1, 2, 3])
def test_superattracting_param_is_periodic(n):
    params = superattracting_param(n)
    assert A_MIN <= params.a <= A_MAX
    c = np.sqrt(-params.a)
    x = c
    for _ in range(n + 1):
        x = params(x)
    assert abs(x - c) < 1e-6


@pytest.mark.parametrize("n", [0, 9])
def test_superattracting_param_range(n):
    with pytest.raises(RangeError):
        superattracting_param(n)


def test_superattracting_param_residual_above_tol():
    with pytest.raises(NonConvergence):
        superattracting_param(2, tol=0.0)


def test_superattracting_params_approach_chebyshev():
    distances = [math.hypot(p.a + 2.0, p.b + 2.0) for p in map(superattracting_param, [1, 2, 3])]
    assert all(x > y for x, y in zip(distances, distances[1:]))


def test_example_fiber_escape_radius(example_2):
    assert example_2.f.fiber_escape_radius == EXAMPLE_FIBER_RADIUS == 2.5


def test_construct_example(example_2):
    assert example_2.n == 2
    assert example_2.period == 3
    assert example_2.eta > 0
    assert example_2.params.b > example_2.superattracting.b
    assert example_2.params.a == example_2.superattracting.a
    assert example_2.f.degree == 4
    assert abs(4.0 * example_2.alpha_n**3) < 1.0
    assert example_2.julia.meta["seed"] == pytest.approx(example_2.beta_n)
    assert classify_params(example_2.params).label == LocusLabel.Escaping


def test_attracting_fiber_fixed_point():
    assert abs(attracting_fiber_fixed_point(2.0)) < 1e-12


def test_sumi_preset_range():
    with pytest.raises(RangeError):
        sumi_preset(0.0, 0.1, 1)
    with pytest.raises(RangeError):
        sumi_preset(3.0, 0.1, 0)
