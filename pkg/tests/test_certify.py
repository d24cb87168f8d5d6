import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pydantic import ValidationError

from skewlab import certify
from skewlab.certify import (
    AngleIntervalSet,
    LemmaParams,
    LemmaReport,
    Region,
    check_angle_combinatorics,
    check_contract,
    check_critical_disjoint,
    check_escape_constant,
    check_escape_empirical,
    check_fiber_escape,
    check_k_box,
    check_reach_left,
    escape_strip_height,
    full_certificate,
    search_certificate,
    strip_escape_steps,
)
from skewlab.config import Config
from skewlab.errors import PerturbationTooSmall, PreconditionViolation
from skewlab.family import BiquadParams
from skewlab.julia import GridSpec

SQRT6_OVER_10 = math.sqrt(6.0) / 10.0


def test_lemma_report_pass_follows_margin():
    assert LemmaReport(lemma_id="x", margin=0.5).passed
    assert not LemmaReport(lemma_id="x", margin=0.0).passed
    with pytest.raises(ValidationError):
        LemmaReport(lemma_id="x", margin=-1.0, passed=True)


def test_lemma_report_serializes_pass():
    report = LemmaReport(lemma_id="x", margin=1.0)
    dumped = report.model_dump(by_alias=True)
    assert dumped["pass"] is True
    assert "passed" not in dumped
    assert LemmaReport.model_validate(dumped) == report


def test_lemma_params_contraction_radius():
    LemmaParams(r=1.0 / 32.0, delta_prime=0.2)
    with pytest.raises(ValidationError):
        LemmaParams(r=7.0 / 128.0, delta_prime=0.2)


def test_region_validation():
    with pytest.raises(ValueError):
        Region.strip(0.0)
    with pytest.raises(ValidationError):
        Region.box(1.0, 0.0, 0.0, 1.0)
    with pytest.raises(ValidationError):
        Region.disk(0, -1.0)


def test_region_sup_distance():
    assert Region.disk(2, 3.0).sup_distance(2 + 0j).contains(3.0)
    assert Region.box(-1.0, 1.0, -1.0, 1.0).sup_distance(0j).contains(math.sqrt(2.0))
    assert len(Region.strip(0.1).sample(100)) == 100


def test_fiber_escape_at_z_equal_2():
    report = check_fiber_escape(Region.disk(2, 0.0))
    assert report.lemma_id == "fiber-escape"
    assert report.passed
    assert report.margin == pytest.approx(39.0625 - 17.5, abs=1e-9)
    assert report.evidence["grid_min"] == pytest.approx(39.0625)


@pytest.mark.parametrize("region", [Region.disk(2, 5.0), Region.box(-3.0, -3.0, 0.0, 0.0)])
def test_fiber_escape_at_worst_case(region):
    # sup |2 - z| is exactly 5
    report = check_fiber_escape(region)
    assert report.passed
    assert report.margin == pytest.approx(39.0625 - 20.0 - 17.5, abs=1e-9)


def test_fiber_escape_precondition():
    with pytest.raises(PreconditionViolation):
        check_fiber_escape(Region.box(8.0, 10.0, -1.0, 1.0))


def test_k_box_chebyshev():
    report = check_k_box(BiquadParams(a=-2.0, b=-2.0), grid=GridSpec.box(-3.0, 3.0, -1.0, 1.0, 61, 3))
    assert report.passed
    assert report.evidence["x_max"] <= 2.0
    assert report.evidence["x_min"] >= -2.0
    assert report.evidence["eps_grid"] == 0.0


def test_k_box_without_bounded_pixels():
    report = check_k_box(BiquadParams(a=0.0, b=3.0), grid=GridSpec.box(-3.0, 3.0, -1.0, 1.0, 7, 3))
    assert not report.passed
    assert report.evidence["bounded_pixels"] == 0


def test_reach_left_example(example_2):
    report = check_reach_left(example_2, r=1.0 / 32.0)
    assert report.passed
    assert report.params.N is not None
    assert report.params.N <= 64
    assert not report.evidence["vacuous"]


def test_reach_left_vacuous(example_2):
    report = check_reach_left(example_2, r=10.0, N_max=8)
    assert report.passed
    assert report.evidence["vacuous"]
    assert report.margin == 9
    assert report.params.N == 0


def test_reach_left_precondition(example_2):
    with pytest.raises(PreconditionViolation):
        check_reach_left(example_2, r=0.0)


def test_escape_empirical_with_certified_steps(example_2):
    reach = check_reach_left(example_2, r=1.0 / 32.0)
    N = strip_escape_steps(reach, 64)
    assert N == reach.params.N + 1
    delta = escape_strip_height(N, example_2.epsilon_n)
    report = check_escape_empirical(example_2, 1.0 / 32.0, delta, N)
    assert report.passed
    assert report.params.N == N


def test_strip_escape_steps_fallback():
    assert strip_escape_steps(LemmaReport(lemma_id="reach-left", margin=0.0), 64) == 64
    vacuous = LemmaReport(lemma_id="reach-left", params=LemmaParams(N=0), margin=65.0)
    assert strip_escape_steps(vacuous, 64) == 1


def test_escape_constant_passes():
    report = check_escape_constant(3, 9e-7, 1e-9)
    assert report.passed
    expected = SQRT6_OVER_10 - 64**3 * (9e-7 + 4e-9 / 63)
    assert report.margin == pytest.approx(expected, rel=1e-9)


def test_escape_constant_fails():
    report = check_escape_constant(3, 1e-6, 0.0)
    assert not report.passed
    assert report.margin < 0


def test_escape_constant_trivial():
    report = check_escape_constant(1, 0.0, 0.0)
    assert report.margin == pytest.approx(SQRT6_OVER_10)
    with pytest.raises(PreconditionViolation):
        check_escape_constant(0, 0.0, 0.0)


def test_escape_strip_height_passes_constant():
    for N in (1, 3, 5):
        delta = escape_strip_height(N, 1e-12)
        assert check_escape_constant(N, delta, 1e-12).passed


@settings(max_examples=60, deadline=None)
@given(
    st.integers(1, 4),
    st.floats(0.0, 1e-3),
    st.floats(0.0, 1e-3),
    st.floats(0.0, 1.0),
    st.floats(0.0, 1.0),
)
def test_escape_constant_monotone(N, delta, eps, shrink_delta, shrink_eps):
    if not check_escape_constant(N, delta, eps).passed:
        return
    assert check_escape_constant(N, delta * shrink_delta, eps * shrink_eps).passed


def test_contract_passes():
    report = check_contract(1.0 / 32.0, 0.2, 0.02)
    assert report.passed
    assert report.evidence["v_chain_gap"] == pytest.approx(0.0995, abs=1e-9)
    assert report.evidence["u_chain_gap"] == pytest.approx(0.10449375, abs=1e-9)
    assert report.evidence["coarse_u_gap"] == pytest.approx(0.25 - 1 / 32 - 1 / 8, abs=1e-9)
    assert report.evidence["grid_margin"] > 0


def test_contract_passes_at_wide_strip():
    report = check_contract(1.0 / 32.0, 0.24, 0.03)
    assert report.passed
    assert report.evidence["v_chain_gap"] == pytest.approx(0.24 - 0.148824, abs=1e-9)


@pytest.mark.parametrize(
    "r, delta_prime, eps",
    [
        (7.0 / 128.0, 0.2, 0.0),
        (1.0 / 32.0, 0.25, 0.0),
        (1.0 / 32.0, 0.2, 0.03),
    ],
)
def test_contract_preconditions(r, delta_prime, eps):
    with pytest.raises(PreconditionViolation):
        check_contract(r, delta_prime, eps)


def test_angle_interval_quadrupling():
    pair = AngleIntervalSet([(Fraction(3, 64), Fraction(13, 64)), (Fraction(51, 64), Fraction(61, 64))])
    assert pair.times(4) == AngleIntervalSet([(Fraction(3, 16), Fraction(13, 16))])


def test_angle_interval_wraps():
    wrapped = AngleIntervalSet([(Fraction(-1, 4), Fraction(1, 4))])
    assert wrapped.intervals == [(0, Fraction(1, 4)), (Fraction(3, 4), 1)]
    assert wrapped.covers_closed(Fraction(1, 8), Fraction(1, 8)) == Fraction(1, 8)


def test_angle_interval_union():
    a = AngleIntervalSet([(0, Fraction(1, 2))])
    b = AngleIntervalSet([(Fraction(1, 4), Fraction(3, 4))])
    assert a.union(b).intervals == [(0, Fraction(3, 4))]
    touching = a.union(AngleIntervalSet([(Fraction(1, 2), Fraction(3, 4))]))
    assert len(touching.intervals) == 2
    assert touching.covers_closed(Fraction(1, 2), Fraction(1, 2)) is None
    assert a.contains(AngleIntervalSet([(Fraction(1, 8), Fraction(1, 4))]))


def test_angle_interval_rejects_degenerate():
    with pytest.raises(ValueError):
        AngleIntervalSet([(Fraction(1, 2), Fraction(1, 2))])
    with pytest.raises(ValueError):
        AngleIntervalSet([(0, 1)])


def test_consecutive_angle_intervals_overlap():
    assert Fraction(3, 16) < Fraction(13, 64)


def test_angle_combinatorics():
    report = check_angle_combinatorics(10)
    assert report.passed
    assert report.evidence["image_ok"]
    assert report.margin == pytest.approx(4.0**-11)
    assert check_angle_combinatorics(3).margin == pytest.approx(4.0**-4)
    with pytest.raises(PreconditionViolation):
        check_angle_combinatorics(0)


def test_escape_empirical_precondition(example_2):
    with pytest.raises(PreconditionViolation):
        check_escape_empirical(example_2, 1.0 / 32.0, 1e-2, 3)


def test_critical_disjoint_precondition(example_2):
    with pytest.raises(PreconditionViolation):
        check_critical_disjoint(example_2, 0.25)


def test_full_certificate_reports_construction_failure(monkeypatch):
    def refuse(n, **kwargs):
        raise PerturbationTooSmall("critical point 0 still bounded")

    monkeypatch.setattr(certify, "construct_example", refuse)
    report = full_certificate(1, Config(threads=1))
    assert not report.verdict
    assert report.failing == ["construct-example"]
    assert report.reports[0].evidence["error"] == "PerturbationTooSmall"


@pytest.mark.slow
def test_full_certificate_pipeline():
    config = Config(threads=1, instance={"julia_depth": 5}, fiber_grid={"nx": 65, "ny": 65})
    report = full_certificate(2, config)
    ids = [r.lemma_id for r in report.reports]
    assert ids == sorted(ids)
    assert {
        "fiber-escape",
        "k-box",
        "reach-left",
        "escape-constant",
        "escape-empirical",
        "contract",
        "angle-combinatorics",
        "critical-disjoint",
        "vertical-expansion",
        "axiom-a",
        "saddle-set",
        "critical-classification",
        "accumulation-gap",
    } == set(ids)
    assert report.verdict == (not report.failing)
    assert report.failing == [r.lemma_id for r in report.reports if not r.passed]
    passed = {r.lemma_id for r in report.reports if r.passed}
    assert {"fiber-escape", "contract", "angle-combinatorics", "saddle-set"} <= passed
    assert report.instance["period"] == 3
    reach = next(r for r in report.reports if r.lemma_id == "reach-left")
    assert report.instance["N"] == reach.params.N + 1
    assert {"fiber-escape", "reach-left", "escape-empirical", "axiom-a"} <= passed


@pytest.mark.slow
def test_search_certificate_finds_an_instance():
    config = Config(threads=2, instance={"julia_depth": 5, "max_n": 4})
    report = search_certificate(config)
    assert report.verdict, report.failing
    assert report.failing == []
    assert all(r.passed for r in report.reports)
