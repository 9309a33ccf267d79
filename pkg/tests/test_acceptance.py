"""One test per acceptance criterion; each records a PASS/FAIL line with its measurements."""

import json
import time

import numpy as np

from conftest import ACCEPTANCE_LINES, FIXTURES, fixture_conformal, fixture_metric
from finslerlab.conformal import ConformalData, make_conformal, verify_conformal_identities
from finslerlab.curvature import curvature_bundle, spray_alpha_beta, spray_from_definition
from finslerlab.exprlang import parse
from finslerlab.metrics import (
    cubic,
    cubic_positivity27,
    eval_F,
    fundamental_tensor,
    phi_derivatives,
    positivity24,
    sample_cone,
)
from finslerlab.mroot import as_mroot, certify_targets, inverse41, rationality_targets, theorem1_check
from finslerlab.proofsteps import (
    case_analysis,
    load_instance,
    solve_for_h,
    verify_cubic_positivity_identity,
    verify_step410,
    verify_step412,
)
from finslerlab.suite import load_config, report_json, run_suite

CONSTANT_METRICS = ["euclidean", "minkowski_cubic", "cubic_pq", "quartic", "cubic_n4"]
M_FAMILY = ["minkowski_cubic", "cubic_pq", "cubic_varying", "quartic", "quartic_varying", "cubic_n4"]
CONFORMAL = ["conformal_const", "conformal_x1", "conformal_sin", "conformal_x1x2"]
PROOFS = ["proof_generic", "proof_orthogonal", "proof_zero", "proof_parallel_p0", "proof_parallel"]


def record(number, ok, text, capsys):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {text}"
    ACCEPTANCE_LINES.append(line)
    with capsys.disabled():
        print(f"\n{line}")
    assert ok, line


def _draws(M, count, rng, radius=0.5, center=None):
    n = M.n
    c = np.zeros(n) if center is None else center
    xs = c + rng.uniform(-radius, radius, (count, n))
    ys = np.concatenate([sample_cone(M, x, 1, rng) for x in xs])
    return xs, ys


def test_criterion_1_closed_form_inverse(capsys):
    rng = np.random.default_rng(101)
    names = ["minkowski_cubic", "cubic_pq", "cubic_varying", "quartic", "cubic_n4"]
    t0 = time.perf_counter()
    worst = 0.0
    for name in names:
        M = fixture_metric(name)
        xs, ys = _draws(M, 200, rng)
        g = fundamental_tensor(M, xs, ys)
        gi = inverse41(as_mroot(M), xs, ys)
        worst = max(worst, float(np.max(np.abs(gi @ g - np.eye(M.n)))))
    dt = time.perf_counter() - t0
    record(1, worst < 1e-8 and dt < 10, f"max|g^ij g_jk - delta| = {worst:.2e} over 5x200 samples (< 1e-8), {dt:.1f}s (< 10s)", capsys)


def test_criterion_2_spray_equivalence(capsys):
    rng = np.random.default_rng(102)
    metrics = [fixture_metric(n) for n in ("cubic_varying", "cubic_pq", "minkowski_cubic")]
    metrics += [make_conformal(fixture_conformal(n)) for n in ("conformal_x1", "conformal_sin")]
    t0 = time.perf_counter()
    worst = 0.0
    for M in metrics:
        xs, ys = _draws(M, 200, rng)
        G1 = spray_from_definition(M, xs, ys)
        G2 = spray_alpha_beta(M, xs, ys)
        dev = np.max(np.abs(G1 - G2), axis=1) / np.maximum(1.0, np.max(np.abs(G1), axis=1))
        worst = max(worst, float(np.max(dev)))
    dt = time.perf_counter() - t0
    record(2, worst < 1e-7 and dt < 10, f"max relative spray deviation {worst:.2e} over 5x200 samples (< 1e-7), {dt:.1f}s (< 10s)", capsys)


def test_criterion_3_flatness(capsys):
    rng = np.random.default_rng(103)
    metrics = {n: fixture_metric(n) for n in CONSTANT_METRICS}
    metrics["conformal_const"] = make_conformal(fixture_conformal("conformal_const"))
    worst = 0.0
    for M in metrics.values():
        xs, ys = _draws(M, 50, rng, radius=2.0)
        cb = curvature_bundle(M, xs, ys)
        worst = max(worst, float(np.max(np.abs(cb.R))), float(np.max(np.abs(cb.Ric))), float(np.max(np.abs(cb.scalarR))))
    record(3, worst < 1e-12, f"max |R|, |Ric|, |r| = {worst:.2e} on {len(metrics)} constant-coefficient fixtures (< 1e-12)", capsys)


def test_criterion_4_conformal_identities(capsys):
    rng = np.random.default_rng(104)
    bases = [
        fixture_conformal("conformal_x1").base,
        cubic([[2, 1, 0], [1, 2, 0], [0, 0, 1]], ["1/3", "0", "1/4"], 1, -1),
    ]
    kappas = ["3", "x1", "sin(x1)", "x1*x2"]
    worst = 0.0
    used = set()
    for draw in range(50):
        kappa = kappas[draw % 4]
        base = bases[(draw // 4) % 2]
        D = ConformalData(base, parse(kappa, 3))
        M = make_conformal(D)
        x = rng.uniform(-1, 1, 3)
        y = sample_cone(M, x, 1, rng)[0]
        lines = verify_conformal_identities(D, x, y)
        assert len(lines) == 8
        worst = max(worst, max(l.residual for l in lines))
        used.add(kappa)
    ok = worst < 1e-7 and used == set(kappas)
    record(4, ok, f"worst scaled deviation {worst:.2e} across 8 identities x 50 draws, kappa in {sorted(used)} (< 1e-7)", capsys)


def test_criterion_5_positivity_equivalence(capsys):
    rng = np.random.default_rng(105)
    agree = total = 0
    worst_identity = 0.0
    while total < 1000:
        p = rng.uniform(-3, 3)
        q = rng.uniform(-3, 3)
        B = rng.uniform(0.01, 4)
        s = rng.uniform(-1, 1) * np.sqrt(B)
        if abs(p * s + q * s**3) < 1e-6 or abs(p) < 1e-3:
            continue
        phi, d1, d2 = phi_derivatives(p, q, s)
        t = positivity24(phi, d1, d2, B, s)
        c = cubic_positivity27(p, q, B, s)
        worst_identity = max(worst_identity, float(c.identity_residual))
        agree += bool(t.verdict) == bool(c.verdict)
        total += 1
    symbolic = verify_cubic_positivity_identity().passed
    ok = agree == total and symbolic and worst_identity < 1e-9
    record(5, ok, f"sign agreement {agree}/{total}, numeric identity residual {worst_identity:.1e}, symbolic identity {'holds' if symbolic else 'FAILS'}", capsys)


def test_criterion_6_rationality(capsys):
    t0 = time.perf_counter()
    results = {}
    for name in CONSTANT_METRICS:
        M = fixture_metric(name)
        certs = certify_targets(M, rationality_targets(M.n), seed=6)
        results[name] = all(c.verdict == "pass" and c.holdoutResidual == 0 for c in certs)
    # a constant kappa multiplies F by e^kappa and every target is invariant under
    # F -> cF, so the conformal fixture is certified through its base after a
    # numeric check of that invariance
    D = fixture_conformal("conformal_const")
    M, base = make_conformal(D), D.base
    xs, ys = _draws(base, 20, np.random.default_rng(106))

    def targets(metric):
        F2 = eval_F(metric, xs, ys).value ** 2
        cb = curvature_bundle(metric, xs, ys)
        return F2[:, None, None] * np.linalg.inv(fundamental_tensor(metric, xs, ys)), cb.Ric, F2 * cb.scalarR

    invariant = all(np.allclose(u, v, rtol=1e-11, atol=1e-12) for u, v in zip(targets(M), targets(base)))
    certs = certify_targets(base, rationality_targets(3), seed=6)
    results["conformal_const"] = invariant and all(c.verdict == "pass" for c in certs)
    dt = time.perf_counter() - t0
    ok = all(results.values()) and dt < 30
    record(6, ok, f"F2 g^ij, Ric, F2 r certified exactly on {sum(results.values())}/{len(results)} constant fixtures, {dt:.1f}s (< 30s)", capsys)


def test_criterion_7_proof_chain(capsys):
    t0 = time.perf_counter()
    instances = [load_instance(FIXTURES / f"{n}.json") for n in PROOFS]
    s410 = verify_step410(3, instances)
    s412 = verify_step412(3, instances)
    verdicts = {}
    consistent = True
    for name, inst in zip(PROOFS, instances):
        v = case_analysis(inst)
        verdicts[name] = v.verdict
        h = solve_for_h(inst)
        if h is not None and inst.f == 0:
            consistent &= v.verdict == "CaseI-homothety"
        if h is not None and inst.f != 0:
            consistent &= v.verdict == "CaseII-infeasible"
        consistent &= v.verdict in ("CaseI-homothety", "CaseII-infeasible", "hypothesis-fails")
    dt = time.perf_counter() - t0
    ok = s410.passed and s412.passed and consistent and dt < 5
    record(7, ok, f"hessian/gradient contractions exact: {s410.passed}/{s412.passed}; verdicts {sorted(set(verdicts.values()))}; {dt:.2f}s (< 5s)", capsys)


def test_criterion_8_isotropy_dichotomy(capsys):
    rng = np.random.default_rng(108)
    verdicts = {}
    metrics = {n: fixture_metric(n) for n in M_FAMILY + ["euclidean", "hyperbolic"]}
    metrics.update({n: make_conformal(fixture_conformal(n)) for n in CONFORMAL})
    const_r = None
    for name, M in metrics.items():
        x = rng.uniform(-0.5, 0.5, M.n) + (np.array([0, 0, 1.5]) if name == "hyperbolic" else 0)
        v = theorem1_check(M, x, sample_cone(M, x, 20, rng))
        verdicts[name] = v.verdict
        if name == "conformal_const":
            const_r = v.max_abs_r
    # Riemannian fixtures (m = 2) report outside-scope; nothing may report a violation
    ok = "violation" not in verdicts.values() and const_r < 1e-9
    counts = {k: list(verdicts.values()).count(k) for k in sorted(set(verdicts.values()))}
    record(8, ok, f"verdicts {counts} on {len(verdicts)} fixtures, no violation; constant kappa max|r| = {const_r:.1e} (< 1e-9)", capsys)


def test_criterion_9_determinism(capsys):
    t0 = time.perf_counter()
    cfg = load_config(FIXTURES / "default_suite.json")
    first = report_json(run_suite(cfg))
    cfg = load_config(FIXTURES / "default_suite.json")
    second = report_json(run_suite(cfg))
    dt = time.perf_counter() - t0
    summary = json.loads(first)["summary"]
    ok = first == second and summary["fail"] == 0 and summary["error"] == 0
    record(9, ok, f"two default-suite runs byte-identical ({len(first)} bytes), {summary['pass']}/{summary['total']} entries pass, {dt / 2:.1f}s per run", capsys)
