from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skewlab.errors import DomainError
from skewlab.numeric import (
    Poly,
    RealInterval,
    interval_eval,
    merge_roots,
    poly_roots,
    roots_batch,
    solve_preimages,
)


def test_poly_strips_trailing_zeros():
    p = Poly([1.0, 2.0, 0.0, 0.0])
    assert p.degree == 1
    assert p.leading == 2.0
    assert not p.is_monic


def test_poly_arithmetic():
    p = Poly([-1.0, 0.0, 1.0])
    q = Poly.from_roots([1.0, -1.0])
    assert p.allclose(q)
    assert (p * p).degree == 4
    assert (p - p).degree == 0
    assert p.derivative().allclose(Poly([0.0, 2.0]))
    assert p.l1_norm == 2.0
    assert p(3.0) == 8.0


def test_poly_compose_and_iterate():
    p = Poly([-2.0, 0.0, 1.0])
    assert p.iterate(0).allclose(Poly([0.0, 1.0]))
    assert p.iterate(1).allclose(p)
    # (z^2 - 2)^2 - 2 = z^4 - 4 z^2 + 2
    assert p.iterate(2).allclose(Poly([2.0, 0.0, -4.0, 0.0, 1.0]))
    z = np.linspace(-2, 2, 7) + 0.3j
    np.testing.assert_allclose(p.iterate(3)(z), p(p(p(z))))


def test_poly_evaluates_arrays():
    p = Poly([1.0, 1.0, 1.0])
    z = np.array([0.0, 1.0, 1j])
    np.testing.assert_allclose(p(z), [1.0, 3.0, 1j])
    assert isinstance(p(2.0), complex)


def test_poly_roots_simple():
    roots = poly_roots(Poly([-1.0, 0.0, 1.0]))
    values = sorted(r.value.real for r in roots)
    assert np.allclose(values, [-1.0, 1.0])
    assert all(r.multiplicity == 1 for r in roots)


def test_poly_roots_unit_circle():
    roots = poly_roots(Poly.monomial(4) - 1.0)
    assert len(roots) == 4
    for r in roots:
        assert abs(abs(r.value) - 1.0) < 1e-10


def test_merge_roots_groups_close_values():
    merged = merge_roots([1.0, 1.0 + 1e-10, -2.0], 1e-9)
    assert len(merged) == 2
    assert merged[0].multiplicity == 2
    assert abs(merged[0].value - 1.0) < 1e-9


def test_roots_batch_degree_one():
    out = roots_batch(np.array([[2.0, 1.0], [-3.0, 3.0]]))
    np.testing.assert_allclose(out[:, 0], [-2.0, 1.0])


def test_roots_batch_rejects_constant():
    with pytest.raises(ValueError):
        roots_batch(np.array([[1.0]]))


def test_solve_preimages():
    p = Poly([-2.0, 0.0, 1.0])
    values = np.array([0.0, 1.0 + 1.0j, -3.0])
    pre = solve_preimages(p, values)
    assert pre.shape == (3, 2)
    np.testing.assert_allclose(p(pre), np.repeat(values[:, None], 2, axis=1), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(
    st.lists(
        st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False),
        min_size=2,
        max_size=6,
    )
)
def test_roots_recover_separated_roots(roots):
    roots = np.array(roots)
    gaps = np.abs(roots[:, None] - roots[None, :]) + np.eye(len(roots)) * 10
    if gaps.min() < 0.1:
        return
    found = np.array([r.value for r in poly_roots(Poly.from_roots(roots))])
    assert len(found) == len(roots)
    distance = np.abs(found[:, None] - roots[None, :]).min(axis=0)
    assert distance.max() < 1e-8


def test_interval_contains_exact_decimal():
    x = interval_eval("1/10 + 2/10")
    assert x.lo <= 0.3 <= x.hi
    assert x.lo < x.hi
    assert interval_eval("sqrt(2)**2").contains(2.0)


def test_interval_literals_are_exact():
    x = interval_eval("1e-7")
    assert x.lo < 1e-7 < x.hi
    y = interval_eval("x", x=Fraction(1, 3))
    assert y.lo < 1 / 3 < y.hi


def test_interval_division_by_zero():
    with pytest.raises(DomainError):
        RealInterval(-1.0, 1.0).__rtruediv__(1.0)
    with pytest.raises(DomainError):
        interval_eval("1 / (x - x)", x=1.0)


def test_interval_rejects_unknown_syntax():
    with pytest.raises(DomainError):
        interval_eval("x if x else 1", x=1.0)
    with pytest.raises(DomainError):
        interval_eval("y + 1")


def test_interval_even_power_of_straddling_interval():
    x = RealInterval(-2.0, 1.0) ** 2
    assert x.contains(0.0)
    assert x.contains(4.0)
    assert x.lo > -1e-12


@settings(max_examples=100, deadline=None)
@given(
    st.floats(-1e6, 1e6, allow_nan=False),
    st.floats(-1e6, 1e6, allow_nan=False),
)
def test_interval_arithmetic_encloses_float_results(a, b):
    x, y = RealInterval.of(a), RealInterval.of(b)
    assert (x + y).contains(a + b)
    assert (x - y).contains(a - b)
    assert (x * y).contains(a * b)
    if b != 0:
        assert (x / y).contains(a / b)
