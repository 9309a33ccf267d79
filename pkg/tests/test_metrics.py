import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FIXTURES, fixture_metric
from finslerlab.errors import ConeDomainError, ConfigError, DefinitenessError, ParameterError, ParseError
from finslerlab.metrics import (
    cubic,
    cubic_positivity27,
    cubic_to_mroot,
    euclidean,
    eval_F,
    fundamental_tensor,
    in_cone,
    inverse_fundamental_tensor,
    is_constant_coefficient,
    metric_from_dict,
    metric_to_dict,
    mroot,
    phi_derivatives,
    positivity24,
    riemannian,
    sample_cone,
)

I3 = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
P1Q0 = cubic(I3, [1, 0, 0], 1, 0)
METRIC_FIXTURES = ["euclidean", "hyperbolic", "minkowski_cubic", "cubic_pq", "cubic_varying", "quartic", "quartic_varying", "cubic_n4"]


def _base(name):
    return np.array([0.0, 0.0, 1.5]) if name == "hyperbolic" else np.zeros(fixture_metric(name).n) + 0.1


def test_euclidean_norm():
    assert eval_F(euclidean(3), [0, 0, 0], [3, 4, 0]).value == pytest.approx(5.0, abs=1e-15)


def test_cubic_value():
    assert eval_F(P1Q0, [0, 0, 0], [1, 1, 0]).value == pytest.approx(2 ** (1 / 3), rel=1e-15)


def test_cubic_negative_radicand():
    with pytest.raises(ConeDomainError, match="-1"):
        eval_F(P1Q0, [0, 0, 0], [-1, 0, 0])


def test_singular_alpha():
    M = cubic([[1, 0, 0], [0, 0, 0], [0, 0, 1]], [1, 0, 0], 1, 0)
    with pytest.raises(DefinitenessError):
        eval_F(M, [0, 0, 0], [1, 0, 0])


def test_euclidean_fundamental_tensor(rng):
    for y in rng.normal(size=(5, 3)):
        assert np.allclose(fundamental_tensor(euclidean(3), np.zeros(3), y), np.eye(3), atol=1e-14)


def test_cubic_fundamental_tensor_against_differences():
    y0 = np.array([1.0, 1.0, 0.0])
    x = np.zeros(3)
    half_f2 = lambda y: 0.5 * float(eval_F(P1Q0, x, y).value) ** 2
    h = 1e-5
    fd = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            ei, ej = np.eye(3)[i] * h, np.eye(3)[j] * h
            fd[i, j] = (half_f2(y0 + ei + ej) - half_f2(y0 + ei - ej) - half_f2(y0 - ei + ej) + half_f2(y0 - ei - ej)) / (4 * h * h)
    assert np.allclose(fundamental_tensor(P1Q0, x, y0), fd, atol=1e-6)


@pytest.mark.parametrize("name", METRIC_FIXTURES)
def test_homogeneity_and_euler(name, rng):
    M = fixture_metric(name)
    x = _base(name)
    ys = sample_cone(M, x, 20, rng)
    xs = np.broadcast_to(x, ys.shape)
    F = eval_F(M, xs, ys).value
    g = fundamental_tensor(M, xs, ys)
    for lam in (0.5, 2.0, 7.0):
        assert np.allclose(eval_F(M, xs, lam * ys).value, lam * F, rtol=1e-12)
    assert np.allclose(fundamental_tensor(M, xs, 2 * ys), g, atol=1e-10)
    assert np.allclose(np.einsum("bij,bi,bj->b", g, ys, ys), F**2, rtol=1e-9)


def test_inverse_examples(rng):
    assert np.allclose(inverse_fundamental_tensor(np.eye(3)), np.eye(3))
    assert np.allclose(inverse_fundamental_tensor(np.diag([1.0, 4.0, 9.0])), np.diag([1, 1 / 4, 1 / 9]))
    a = rng.normal(size=(3, 3))
    spd = a @ a.T + 0.5 * np.eye(3)
    assert np.allclose(inverse_fundamental_tensor(spd) @ spd, np.eye(3), atol=1e-10)


def test_inverse_near_singular():
    with pytest.raises(DefinitenessError, match="condition"):
        inverse_fundamental_tensor(np.diag([1.0, 1.0, 1e-14]))


@pytest.mark.parametrize("name", ["minkowski_cubic", "cubic_pq", "cubic_varying"])
def test_cubic_equals_its_cubic_form(name, rng):
    C = fixture_metric(name)
    Mr = cubic_to_mroot(C)
    x = np.full(3, 0.2)
    ys = sample_cone(C, x, 30, rng)
    xs = np.broadcast_to(x, ys.shape)
    assert np.allclose(eval_F(C, xs, ys).value, eval_F(Mr, xs, ys).value, rtol=1e-12, atol=0)


def test_positivity_riemannian_profile():
    r = positivity24(1.0, 0.0, 0.0, 0.7, 0.3)
    assert r.value == 1.0 and r.verdict


def test_positivity_examples():
    for B, s, sign in ((0.09, 0.2, True), (0.5, 0.1, False)):
        phi, d1, d2 = phi_derivatives(1, 0, s)
        t = positivity24(phi, d1, d2, B, s)
        c = cubic_positivity27(1, 0, B, s)
        assert bool(t.verdict) == bool(c.verdict) == sign
    c = cubic_positivity27(1, 0, 0.09, 0.2)
    phi = 0.2 ** (1 / 3)
    assert c.value == pytest.approx(0.07 / phi**5, rel=1e-12)


def test_positivity_coefficient_substitution():
    # p=1, q=-1, B=1: 4p + 3qB = 1 so the bracket is s^2 - 1
    s = 0.4
    c = cubic_positivity27(1, -1, 1.0, s)
    phi = (s - s**3) ** (1 / 3)
    assert c.value == pytest.approx((s * s - 1) / phi**5, rel=1e-12)


def test_positivity_domain_errors():
    with pytest.raises(ParameterError):
        positivity24(1.0, 0.0, 0.0, 0.04, 0.3)
    with pytest.raises(ConeDomainError):
        cubic_positivity27(1, 0, 1.0, 0.0)


@settings(max_examples=100, deadline=None)
@given(
    st.floats(-3, 3).filter(lambda v: abs(v) > 0.05),
    st.floats(-3, 3),
    st.floats(0.01, 4),
    st.floats(-0.999, 0.999),
)
def test_positivity_signs_agree(p, q, B, frac):
    s = frac * np.sqrt(B)
    u = p * s + q * s**3
    if abs(u) < 1e-6:
        return
    c = cubic_positivity27(p, q, B, s)
    phi, d1, d2 = phi_derivatives(p, q, s)
    t = positivity24(phi, d1, d2, B, s)
    assert c.identity_residual < 1e-9
    if abs(t.value) > 1e-9 * max(1.0, abs(phi)):
        assert bool(t.verdict) == bool(c.verdict)


def test_file_round_trip():
    for name in METRIC_FIXTURES:
        d = json.loads((FIXTURES / f"{name}.json").read_text())
        M = metric_from_dict(d)
        assert metric_from_dict(metric_to_dict(M)) == M


def test_symmetric_mates_filled():
    M = metric_from_dict({"dimension": 3, "type": "riemannian", "a": [["2", "1", "0"], ["", "2", ""], ["", "", "1"]]})
    assert M.a[1][0] == M.a[0][1]
    R = mroot(3, 4, {"1122": "1/3", "2211": "1/3"})
    assert len(R.entries) == 1


def test_bad_files():
    with pytest.raises(ConfigError):
        metric_from_dict({"dimension": 3, "type": "spline"})
    with pytest.raises(ConfigError):
        mroot(3, 4, {"1,2": "1"})
    with pytest.raises(ParseError):
        metric_from_dict({"dimension": 3, "type": "riemannian", "a": [["x4", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]]})


def test_constant_detection():
    assert is_constant_coefficient(fixture_metric("cubic_pq"))
    assert not is_constant_coefficient(fixture_metric("cubic_varying"))


def test_cone_membership():
    ok = in_cone(P1Q0, np.zeros((3, 3)), np.array([[1.0, 0.1, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))
    assert ok.tolist() == [True, False, False]


def test_riemannian_constructor_conflict():
    with pytest.raises(ConfigError):
        riemannian([["1", "2", "0"], ["3", "1", "0"], ["0", "0", "1"]])
