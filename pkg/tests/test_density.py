import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import simpson

from truncdens.basis import PolyCoeffs, enumerate_basis
from truncdens.density import (
    LogDensity,
    TruncatedDensity,
    cdf_1d,
    kl_divergence,
    log_partition,
    taylor_log_density,
    taylor_polynomial,
    tv_distance,
    write_density_csv,
)
from truncdens.integrate import QuadratureSpec, SurvivalSet

S = SurvivalSet.interval(0.0, 0.5)
K = SurvivalSet.cube(1)
FINE = QuadratureSpec("gauss_legendre_1d", 256)


def poly(*coeffs):
    return PolyCoeffs(enumerate_basis(1, len(coeffs)), np.array(coeffs, dtype=float))


def test_builtin_targets():
    f = LogDensity.sin10()
    assert f(np.array([[0.05 * math.pi]]))[0] == pytest.approx(1.0)
    assert f.B == 1.0 and f.M == 10.0
    e = LogDensity.exp_scaled(2.0)
    assert e(np.array([[0.5]]))[0] == pytest.approx(math.e)
    assert e.derivative((3,), np.array([[0.0]]))[0] == pytest.approx(8.0)


def test_bound_violation_rejected():
    with pytest.raises(ValueError):
        LogDensity(lambda x: 5 * x[:, 0], d=1, B=1.0)


def test_from_expression_matches_builtin():
    g = LogDensity.from_expression("sin(10*x)")
    x = np.linspace(0, 1, 11)[:, None]
    assert np.allclose(g(x), np.sin(10 * x[:, 0]))
    assert g.derivative((2,), x) == pytest.approx(-100 * np.sin(10 * x[:, 0]))


def test_log_partition_oracle(oracle):
    s = oracle["scalars"]
    f = LogDensity.sin10()
    assert log_partition(f, K) == pytest.approx(s["psi_sin10_0_1"], abs=1e-12)
    assert log_partition(f, S) == pytest.approx(s["psi_sin10_0_half"], abs=1e-12)
    assert log_partition(PolyCoeffs.zeros(1, 2), S) == pytest.approx(math.log(0.5))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=6), st.floats(0, 0.7), st.floats(0.05, 0.3))
def test_normalization_property(coeffs, a, length):
    P = TruncatedDensity(poly(*coeffs), SurvivalSet.interval(a, a + length))
    assert P.normalization() == pytest.approx(1.0, abs=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_psi_bound(coeffs):
    p = poly(*coeffs)
    sup = np.abs(p(np.linspace(0, 1, 4001))).max()
    assert abs(log_partition(p, S)) <= sup + math.log(1 / 0.5) + 1e-9


def test_pdf_zero_outside_set():
    P = TruncatedDensity(LogDensity.sin10(), S)
    assert P.pdf(np.array([[0.75]]))[0] == 0.0
    assert P.pdf(np.array([[0.25]]))[0] > 0.0


def test_kl_examples(oracle):
    s = oracle["scalars"]
    U = TruncatedDensity(PolyCoeffs.zeros(1, 1), K)
    Q = TruncatedDensity(poly(1.0), K)
    assert kl_divergence(U, U) == 0.0
    assert kl_divergence(U, Q) == pytest.approx(s["kl_uniform_vs_exp_x_closed_form"], abs=1e-12)
    with pytest.raises(ValueError):
        kl_divergence(U, TruncatedDensity(poly(1.0), S))


def test_tv_examples():
    U = TruncatedDensity(PolyCoeffs.zeros(1, 1), K)
    assert tv_distance(U, U) == 0.0
    left = TruncatedDensity(PolyCoeffs.zeros(1, 1), S)
    right = TruncatedDensity(PolyCoeffs.zeros(1, 1), SurvivalSet.interval(0.5, 1.0))
    assert tv_distance(left, right) == pytest.approx(1.0, abs=1e-12)
    assert tv_distance(U, left) == pytest.approx(0.5, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=2), st.lists(st.floats(-3, 3), min_size=2, max_size=2))
def test_divergence_properties(a, b):
    P, Q = TruncatedDensity(poly(*a), S), TruncatedDensity(poly(*b), S)
    tv, kl = tv_distance(P, Q), kl_divergence(P, Q)
    assert 0.0 <= tv <= 1.0
    assert tv == pytest.approx(tv_distance(Q, P), abs=1e-12)
    assert kl >= 0.0
    assert tv <= math.sqrt(kl) + 1e-6


def test_mean_of_exponential_density(oracle):
    P = TruncatedDensity(poly(1.0), K)
    x = P.rule.nodes[:, 0]
    mean = float(np.dot(P.rule.weights, x * P.pdf(P.rule.nodes)))
    assert mean == pytest.approx(oracle["scalars"]["mean_exp_x_closed_form"], abs=1e-12)


def test_taylor_of_polynomial_is_exact():
    p = poly(0.5, -1.0, 2.0)
    f = LogDensity.from_poly(p)
    q, const = taylor_polynomial(f, 3, center=[0.3])
    assert const == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(q.v, p.v)


def test_taylor_of_sine():
    q = taylor_log_density(LogDensity.sin10(), 3)
    assert np.allclose(q.v, [10.0, 0.0, -1000.0 / 6])


def test_cdf_oracle(oracle):
    P = TruncatedDensity(LogDensity.sin10(), S)
    assert cdf_1d(P, 0.25) == pytest.approx(oracle["scalars"]["cdf_sin10_half_at_quarter"], abs=1e-9)
    assert cdf_1d(P, [0.0, 0.5, 0.9]) == pytest.approx([0.0, 1.0, 1.0])


def test_density_csv_round_trip(tmp_path):
    fit = poly(1.0, -2.0, 0.5)
    for T in (K, S):
        path = tmp_path / "d.csv"
        write_density_csv(TruncatedDensity(fit, T), path, 1025)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["x", "pdf", "logpdf"]
        data = np.array(rows[1:], dtype=float)
        inside = data[:, 0] <= T.exact_1d[0][1]
        assert simpson(data[inside, 1], x=data[inside, 0]) == pytest.approx(1.0, abs=1e-6)
