import time
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp

from conftest import FIXTURES
from finslerlab.errors import ConfigError, DegenerateGammaError, ParameterError
from finslerlab.proofsteps import (
    build_b2,
    case_analysis,
    gamma,
    gradient_identity_residue,
    h_from_contraction,
    hessian_identity_residue,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    make_instance,
    positivity_identity_residue,
    solve_for_h,
    gradient_step_residue,
    verify_cubic_positivity_identity,
    verify_step410,
    verify_step412,
)

I3 = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
EXAMPLE = make_instance(I3, ["1/2", 0, 0], [1, 0, 0], 1, 0)


def _r(v):
    return sp.Rational(v.numerator, v.denominator)


def b2_oracle(inst, h):
    """Brute-force sympy expansion of the quadratic identity, term by term."""
    y = sp.symbols(f"y1:{inst.n + 1}")
    a = sp.Matrix(inst.n, inst.n, lambda i, j: _r(inst.atilde[i][j]))
    b = sp.Matrix([_r(v) for v in inst.btilde])
    k = sp.Matrix([_r(v) for v in inst.kgrad])
    p, q = _r(inst.p), _r(inst.q)
    B = (b.T * a.inv() * b)[0]
    f = (b.T * a.inv() * k)[0]
    Y = sp.Matrix(y)
    at2, bt, k0 = (Y.T * a * Y)[0], (b.T * Y)[0], (k.T * Y)[0]
    c4 = 4 * p + 3 * q * B
    expr = B * c4 * k0**2 - 4 * c4 * bt * k0 * f + 4 * p * at2 * f**2 - h * (p * B * at2 - c4 * bt**2)
    return sp.Poly(sp.expand(expr), *y), y




def test_zero_gradient_gives_minus_h_gamma():
    inst = make_instance(I3, ["1/2", "1/3", 0], [0, 0, 0], 1, 2)
    E = build_b2(inst)
    h = E.ring.var("h")
    assert (E + h * gamma(inst)).is_zero()
    assert build_b2(inst, 0).is_zero()


def test_example_coefficients_against_oracle():
    for hv in (Fraction(0), Fraction(8, 3), Fraction(-5, 7)):
        E = build_b2(EXAMPLE, hv)
        oracle, y = b2_oracle(EXAMPLE, _r(hv))
        mine = {e[:3]: c for e, c in E.terms.items()}
        theirs = {m: Fraction(int(c.p), int(c.q)) for m, c in zip(oracle.monoms(), oracle.coeffs())}
        assert mine == theirs
    # y1^2: B*4p - 4*4p*(1/2)(1/2) + 4p*(1/4) - h(p/4 - 4p/4) = -2 + (3/4) h
    assert build_b2(EXAMPLE, 0).terms[(2, 0, 0, 0)] == -2
    assert build_b2(EXAMPLE).coefficient({"y1": 2, "h": 1}).constant_value() == Fraction(3, 4)


def test_random_instances_match_oracle():
    rng = np.random.default_rng(4)
    checked = 0
    while checked < 50:
        m = rng.integers(-3, 4, size=(3, 3))
        a = (m @ m.T + np.eye(3, dtype=int)).tolist()
        b = [Fraction(int(v), int(d)) for v, d in zip(rng.integers(-4, 5, 3), rng.integers(1, 4, 3))]
        k = [Fraction(int(v), int(d)) for v, d in zip(rng.integers(-4, 5, 3), rng.integers(1, 4, 3))]
        p, q = Fraction(int(rng.integers(-3, 4))), Fraction(int(rng.integers(-3, 4)), 2)
        try:
            inst = make_instance(a, b, k, p, q)
        except ParameterError:
            continue
        hv = Fraction(int(rng.integers(-5, 6)), 3)
        E = build_b2(inst, hv)
        oracle, _ = b2_oracle(inst, _r(hv))
        theirs = {m: Fraction(int(c.p), int(c.q)) for m, c in zip(oracle.monoms(), oracle.coeffs()) if c != 0}
        assert {e[:3]: c for e, c in E.terms.items()} == theirs
        assert all(sum(e[:3]) == 2 for e in E.terms)
        checked += 1


def test_solve_for_h_cases():
    assert solve_for_h(EXAMPLE.with_kgrad([0, 0, 0])) == 0
    assert solve_for_h(EXAMPLE) is None
    inst = load_instance(FIXTURES / "proof_parallel_p0.json")
    h = solve_for_h(inst)
    assert h is not None and inst.f != 0
    assert h == h_from_contraction(inst)


def test_degenerate_gamma():
    inst = make_instance(I3, [0, 0, 0], [1, 0, 0], 1, 1)
    with pytest.raises(DegenerateGammaError):
        solve_for_h(inst)
    with pytest.raises(DegenerateGammaError):
        case_analysis(inst)


def test_hessian_step_symbolic():
    assert hessian_identity_residue(3).is_zero()
    r = verify_step410(3, [EXAMPLE, load_instance(FIXTURES / "proof_generic.json")])
    assert r.passed and r.name == "hessian-contraction"


def test_h_value_example():
    assert h_from_contraction(EXAMPLE) == Fraction(8, 3)
    assert h_from_contraction(EXAMPLE.with_kgrad([0, 1, 0])) == 0


def test_gradient_step_symbolic():
    assert gradient_identity_residue(3).is_zero()
    assert verify_step412(3, [EXAMPLE]).passed


def test_gradient_step_parallel_and_orthogonal():
    t, c = Fraction(1, 2), Fraction(3)
    par = make_instance(I3, [t, 0, 0], [c, 0, 0], 1, 1)
    assert par.f == t * c and par.B == t * t
    assert gradient_step_residue(par).is_zero()
    orth = make_instance(I3, [t, 0, 0], [0, 1, 0], 1, 1)
    assert orth.f == 0 and gradient_step_residue(orth).is_zero()


def test_case_analysis_verdicts():
    assert case_analysis(EXAMPLE.with_kgrad([0, 0, 0])).verdict == "CaseI-homothety"
    assert case_analysis(EXAMPLE.with_kgrad([0, 1, 0])).verdict == "hypothesis-fails"
    v = case_analysis(load_instance(FIXTURES / "proof_parallel_p0.json"))
    assert v.verdict == "CaseII-infeasible" and v.routes == ("definiteness", "positivity")


def test_case_analysis_never_endorses_nonzero_gradient():
    rng = np.random.default_rng(11)
    seen = set()
    for _ in range(150):
        b = [Fraction(int(v), 2) for v in rng.integers(-3, 4, 3)]
        if not any(b):
            continue
        scale = Fraction(int(rng.integers(-3, 4)), int(rng.integers(1, 3)))
        k = [scale * v for v in b] if rng.random() < 0.5 else [Fraction(int(v)) for v in rng.integers(-2, 3, 3)]
        p = Fraction(int(rng.integers(0, 3)))
        q = Fraction(int(rng.integers(-2, 3)))
        try:
            inst = make_instance(I3, b, k, p, q)
        except ParameterError:
            continue
        v = case_analysis(inst)
        seen.add(v.verdict)
        assert v.verdict in ("CaseI-homothety", "CaseII-infeasible", "hypothesis-fails")
        if v.verdict == "CaseI-homothety":
            assert not any(k)
        if solve_for_h(inst) is not None and inst.f != 0:
            assert v.verdict == "CaseII-infeasible"
    assert {"CaseII-infeasible", "hypothesis-fails"} <= seen


def test_positivity_identity():
    assert positivity_identity_residue().is_zero()
    assert verify_cubic_positivity_identity().passed


def test_instance_validation():
    with pytest.raises(ParameterError):
        make_instance([[1, 0, 0], [0, -1, 0], [0, 0, 1]], [1, 0, 0], [0, 0, 0], 1, 0)
    with pytest.raises(ParameterError):
        make_instance(I3, [1, 0, 0], [0, 0, 0], 1, -1)  # p + qB = 0
    with pytest.raises(ParameterError):
        make_instance(I3, [1, 0, 0], [0, 0, 0], 3, -4)  # 4p + 3qB = 0
    with pytest.raises(ConfigError):
        instance_from_dict({"atilde": I3, "btilde": [1, 0, 0]})
    with pytest.raises(ConfigError):
        instance_from_dict({"n": 4, "atilde": I3, "btilde": [1, 0, 0], "kgrad": [0, 0, 0], "p": 1, "q": 0})


def test_instance_round_trip():
    assert instance_from_dict(instance_to_dict(EXAMPLE)) == EXAMPLE


def test_proof_chain_runtime():
    t0 = time.perf_counter()
    verify_step410(3)
    verify_step412(3)
    assert time.perf_counter() - t0 < 5
