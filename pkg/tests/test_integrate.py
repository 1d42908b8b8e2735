import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from truncdens.integrate import (
    QuadratureSpec,
    SurvivalSet,
    estimate_volume,
    integrate_box,
    integrate_set,
    set_rule,
    union_rule,
)

GL = QuadratureSpec("gauss_legendre_1d", 64)


def test_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec("simpson", 10)
    with pytest.raises(ValueError):
        QuadratureSpec("tensor_grid", 1)
    assert QuadratureSpec.for_degree(20).resolution == 160


def test_interval_set_basics():
    S = SurvivalSet.interval(0.0, 0.5)
    assert S.volume_estimate == 0.5
    assert list(S.contains(np.array([[0.1], [0.5], [0.7]]))) == [True, True, False]
    with pytest.raises(ValueError):
        SurvivalSet.interval(0.4, 0.4)


def test_union_of_intervals_merges():
    S = SurvivalSet.intervals([(0.5, 0.75), (0.0, 0.25), (0.2, 0.3)])
    assert S.exact_1d == ((0.0, 0.3), (0.5, 0.75))
    assert S.volume_estimate == pytest.approx(0.55)


def test_membership_sets():
    half = SurvivalSet.halfspace([1.0, 0.0], 0.25)
    assert half.box is not None and half.volume_estimate == pytest.approx(0.25)
    ball = SurvivalSet.ball([0.5, 0.5], 0.4)
    assert ball.volume_estimate == pytest.approx(math.pi * 0.16, abs=4 * ball.volume_stderr + 1e-3)
    with pytest.raises(ValueError):
        SurvivalSet.from_membership(2, lambda x: np.zeros(len(x), dtype=bool))


def test_from_membership_1d_brackets_interval():
    S = SurvivalSet.from_membership(1, lambda x: (x[:, 0] >= 0.2) & (x[:, 0] <= 0.6))
    (a, b), = S.exact_1d
    assert a == pytest.approx(0.2, abs=1e-4) and b == pytest.approx(0.6, abs=1e-4)


def test_set_json_round_trip():
    for S in (SurvivalSet.intervals([(0, 0.2), (0.4, 0.9)]), SurvivalSet.from_box([0.1, 0.2], [0.5, 1.0])):
        T = SurvivalSet.from_json(S.to_json())
        assert T.to_dict() == S.to_dict()


def test_integrate_examples():
    assert integrate_box(lambda x: np.ones(len(x)), 1, GL)[0] == pytest.approx(1.0, abs=1e-14)
    assert integrate_box(lambda x: x[:, 0], 1, GL)[0] == pytest.approx(0.5, abs=1e-14)
    val, _ = integrate_box(lambda x: x[:, 0] * x[:, 1], 2, QuadratureSpec("tensor_grid", 32))
    assert val == pytest.approx(0.25, abs=1e-12)
    assert integrate_set(lambda x: np.exp(x[:, 0]), SurvivalSet.interval(0, 0.5), GL)[0] == pytest.approx(
        math.exp(0.5) - 1, abs=1e-14)


def test_integrate_sin_oracle(oracle):
    s = oracle["scalars"]
    full = integrate_box(lambda x: np.exp(np.sin(10 * x[:, 0])), 1, GL)
    half = integrate_set(lambda x: np.exp(np.sin(10 * x[:, 0])), SurvivalSet.interval(0, 0.5), GL)
    assert full[0] == pytest.approx(s["int_exp_sin10_0_1"], rel=1e-12)
    assert half[0] == pytest.approx(s["int_exp_sin10_0_half"], rel=1e-12)
    assert full[1] < 1e-12


def test_integrate_rejects_non_finite():
    with pytest.raises(FloatingPointError):
        integrate_box(lambda x: np.full(len(x), np.nan), 1, GL)


def test_monte_carlo_is_seeded_and_within_error():
    spec = QuadratureSpec("monte_carlo", 50_000, seed=4)
    a = integrate_box(lambda x: x[:, 0] ** 2 + x[:, 1], 2, spec)
    b = integrate_box(lambda x: x[:, 0] ** 2 + x[:, 1], 2, spec)
    assert a == b
    assert abs(a[0] - (1 / 3 + 1 / 2)) <= 4 * a[1]


def test_masked_monte_carlo_set_integral():
    S = SurvivalSet.ball([0.5, 0.5], 0.3)
    val, err = integrate_set(lambda x: np.ones(len(x)), S, QuadratureSpec("monte_carlo", 200_000, seed=1))
    assert abs(val - math.pi * 0.09) <= 4 * err + 4 * S.volume_stderr


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 12), st.floats(0.0, 0.5), st.floats(0.1, 0.5))
def test_gauss_legendre_exact_on_polynomials(p, a, length):
    S = SurvivalSet.interval(a, a + length)
    val, _ = integrate_set(lambda x: x[:, 0] ** p, S, GL)
    exact = ((a + length) ** (p + 1) - a ** (p + 1)) / (p + 1)
    assert val == pytest.approx(exact, rel=1e-12, abs=1e-15)


def test_volume_estimates():
    assert estimate_volume(SurvivalSet.interval(0.1, 0.4)) == (pytest.approx(0.3), 0.0)
    assert estimate_volume(SurvivalSet.from_box([0, 0], [0.5, 0.5]))[0] == pytest.approx(0.25)
    vol, err = estimate_volume(SurvivalSet.ball([0.5, 0.5], 0.5), n=100_000, seed=2)
    assert abs(vol - math.pi / 4) <= 4 * err


def test_union_rule_restrict_and_breaks():
    S = SurvivalSet.interval(0.0, 0.5)
    K = SurvivalSet.cube(1)
    rule = union_rule([S, K], GL)
    assert rule.integrate(np.ones(len(rule.weights))) == pytest.approx(1.0, abs=1e-14)
    restricted = union_rule([S, K], GL, restrict=True)
    assert restricted.integrate(np.ones(len(restricted.weights))) == pytest.approx(0.5, abs=1e-14)
    assert set_rule(S, GL).nodes.max() <= 0.5
