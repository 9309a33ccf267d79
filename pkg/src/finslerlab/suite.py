"""Config-driven check suite: fixtures x registry checks -> deterministic report."""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .conformal import ConformalData, conformal_from_dict, homothety_test, make_conformal, verify_conformal_identities
from .curvature import curvature_bundle, fit_weakly_isotropic, spray_alpha_beta, spray_from_definition
from .errors import ConfigError, FinslerError
from .exprlang import fold_constant
from .metrics import (
    CubicSpec,
    MetricSpec,
    RiemannSpec,
    beta_norm_sq,
    coefficient_exprs,
    cubic_positivity27,
    cubic_to_mroot,
    dimension,
    eval_F,
    fundamental_tensor,
    is_constant_coefficient,
    metric_from_dict,
    phi_derivatives,
    positivity24,
    root_degree,
    sample_cone,
)
from .mroot import certify_targets, inverse41, rationality_targets, theorem1_check
from .proofsteps import ProofInstance, case_analysis, instance_from_dict, solve_for_h, verify_cubic_positivity_identity
from .proofsteps import verify_step410, verify_step412

FIXTURE_DIR = Path(__file__).with_name("fixtures")
DEFAULT_CONFIG = FIXTURE_DIR / "default_suite.json"

DEFAULT_TOLERANCES = {
    "positivity-24-27": 1e-9,
    "spray-cross-check": 1e-7,
    "minkowski-flatness": 1e-12,
    "conformal-identities-33": 1e-7,
    "inverse-41": 1e-8,
    "rationality-lemma-24": 0.0,
    "theorem1": 1e-6,
    "proofchain-410-412": 0.0,
    "case-analysis": 0.0,
    "homothety": 1e-9,
}
REGISTRY = tuple(DEFAULT_TOLERANCES)
CASE_VERDICTS = ("CaseI-homothety", "CaseII-infeasible", "hypothesis-fails")


@dataclass
class Fixture:
    name: str
    kind: str  # metric | conformal | proof
    data: object
    x_center: np.ndarray | None = None
    x_radius: float = 0.5
    expect: str | None = None

    @property
    def metric(self) -> MetricSpec | None:
        if self.kind == "metric":
            return self.data
        if self.kind == "conformal":
            return make_conformal(self.data)
        return None


@dataclass
class SuiteConfig:
    fixtures: list
    checks: list
    samples: int = 16
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    format: str = "json"

    def tolerance(self, check: str) -> float:
        return float(self.tolerances.get(check, DEFAULT_TOLERANCES[check]))


def load_fixture(path: Path, name: str | None = None) -> Fixture:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read fixture {path}: {err.strerror}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"fixture {path} is not valid JSON: {err}") from None
    name = name or path.stem
    try:
        if "kappa" in d:
            return Fixture(name, "conformal", conformal_from_dict(d))
        if "btilde" in d:
            return Fixture(name, "proof", instance_from_dict(d))
        return Fixture(name, "metric", metric_from_dict(d))
    except FinslerError as err:
        raise ConfigError(f"fixture {path}: {err}") from None


def parse_config(d: dict, base_dir: Path) -> SuiteConfig:
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(d) - {"metrics", "checks", "samples", "seed", "tolerances", "format"}
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    fixtures = []
    for entry in d.get("metrics", []):
        opts = {"path": entry} if isinstance(entry, str) else dict(entry)
        if "path" not in opts:
            raise ConfigError("each metrics entry needs a path")
        path = Path(opts["path"])
        if not path.is_absolute():
            path = base_dir / path
        fx = load_fixture(path, opts.get("name"))
        if "x_center" in opts:
            fx.x_center = np.asarray(opts["x_center"], dtype=float)
        fx.x_radius = float(opts.get("x_radius", fx.x_radius))
        fx.expect = opts.get("expect")
        fixtures.append(fx)
    names = [f.name for f in fixtures]
    if len(set(names)) != len(names):
        raise ConfigError("fixture names must be unique")
    checks = list(d.get("checks", REGISTRY))
    bad = [c for c in checks if c not in REGISTRY]
    if bad:
        raise ConfigError(f"unknown checks: {', '.join(bad)}; registry is {', '.join(REGISTRY)}")
    samples = d.get("samples", 16)
    if not isinstance(samples, int) or samples < 8:
        raise ConfigError("samples must be an integer >= 8")
    tolerances = d.get("tolerances", {}) or {}
    bad = [c for c in tolerances if c not in REGISTRY]
    if bad:
        raise ConfigError(f"tolerances given for unknown checks: {', '.join(bad)}")
    fmt = d.get("format", "json")
    if fmt not in ("json", "md"):
        raise ConfigError("format must be 'json' or 'md'")
    seed = d.get("seed", 0)
    if not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("seed must be a 64-bit non-negative integer")
    return SuiteConfig(fixtures, checks, samples, seed, tolerances, fmt)


def load_config(path) -> SuiteConfig:
    path = Path(path)
    try:
        with open(path) as fh:
            d = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err.strerror}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"config {path} is not valid JSON: {err}") from None
    return parse_config(d, path.parent)


# sampling helpers ------------------------------------------------------------------


def check_rng(seed: int, check: str, fixture: str) -> np.random.Generator:
    return np.random.default_rng([seed & (2**64 - 1), zlib.crc32(f"{check}/{fixture}".encode())])


def _base_points(fx: Fixture, count: int, rng) -> np.ndarray:
    n = fx.data.n if fx.kind == "conformal" else dimension(fx.data)
    center = fx.x_center if fx.x_center is not None else np.zeros(n)
    return center + rng.uniform(-fx.x_radius, fx.x_radius, size=(count, n))


def _cone_samples(M: MetricSpec, fx: Fixture, count: int, rng):
    """`count` base points, each with one cone direction."""
    xs = _base_points(fx, count, rng)
    ys = np.concatenate([sample_cone(M, x, 1, rng) for x in xs])
    return xs, ys


# checks -----------------------------------------------------------------------------


@dataclass
class Outcome:
    residual: float
    details: dict
    passed: bool | None = None  # None: decided by residual <= tolerance


def _is_cubic(M) -> bool:
    return isinstance(M, CubicSpec)


def _m_family(M) -> bool:
    return M is not None and not isinstance(M, RiemannSpec)


def _rational_constant(M) -> bool:
    return is_constant_coefficient(M) and all(fold_constant(e) is not None for e in coefficient_exprs(M))


def check_positivity(fx: Fixture, cfg: SuiteConfig, rng) -> Outcome:
    C = fx.metric
    xs = _base_points(fx, cfg.samples, rng)
    B = beta_norm_sq(C, xs)
    count = 4 * cfg.samples
    Bs = np.repeat(B, 4)
    s = rng.uniform(-1, 1, size=count) * np.sqrt(Bs)
    u = float(C.p) * s + float(C.q) * s**3
    keep = np.abs(u) > 1e-6
    s, Bs = s[keep], Bs[keep]
    phi, dphi, ddphi = phi_derivatives(C.p, C.q, s)
    t = positivity24(phi, dphi, ddphi, Bs, s)
    c = cubic_positivity27(C.p, C.q, Bs, s)
    clear = np.abs(c.value) > 1e-9 * np.maximum(1.0, np.abs(t.value))
    disagree = int(np.count_nonzero((t.verdict != c.verdict) & clear))
    ident = verify_cubic_positivity_identity()
    worst = float(np.max(c.identity_residual)) if len(s) else 0.0
    residual = max(worst, float(disagree), 0.0 if ident.passed else 1.0)
    return Outcome(
        residual,
        {
            "tuples": int(len(s)),
            "sign_disagreements": disagree,
            "positive_fraction": _num(np.mean(t.verdict)) if len(s) else None,
            "symbolic_identity": ident.passed,
        },
    )


def check_spray(fx: Fixture, cfg: SuiteConfig, rng) -> Outcome:
    C = fx.metric
    xs, ys = _cone_samples(C, fx, cfg.samples, rng)
    G1 = spray_from_definition(C, xs, ys)
    G2 = spray_alpha_beta(C, xs, ys)
    dev = np.max(np.abs(G1 - G2), axis=-1) / np.maximum(1.0, np.max(np.abs(G1), axis=-1))
    return Outcome(float(np.max(dev)), {"samples": len(xs), "max_abs_G": _num(np.max(np.abs(G1)))})


def check_flatness(fx: Fixture, cfg: SuiteConfig, rng) -> Outcome:
    M = fx.metric
    xs, ys = _cone_samples(M, fx, cfg.samples, rng)
    cb = curvature_bundle(M, xs, ys)
    parts = {
        "max_abs_R": float(np.max(np.abs(cb.R))),
        "max_abs_Ric": float(np.max(np.abs(cb.Ric))),
        "max_abs_r": float(np.max(np.abs(cb.scalarR))),
    }
    return Outcome(max(parts.values()), {k: _num(v) for k, v in parts.items()} | {"samples": len(xs)})


def check_conformal(fx: Fixture, cfg: SuiteConfig, rng) -> Outcome:
    D: ConformalData = fx.data
    M = make_conformal(D)
    xs, ys = _cone_samples(M, fx, cfg.samples, rng)
    worst: dict = {}
    for x, y in zip(xs, ys):
        for line in verify_conformal_identities(D, x, y):
            worst[line.name] = max(worst.get(line.name, 0.0), line.residual)
    return Outcome(max(worst.values()), {"lines": {k: _num(v) for k, v in sorted(worst.items())}, "samples": len(xs)})


def check_inverse(fx: Fixture, cfg: SuiteConfig, rng) -> Outcome:
    M = fx.metric
    xs, ys = _cone_samples(M, fx, cfg.samples, rng)
    Mr = cubic_to_mroot(M) if _is_cubic(M) else M
    gi = inverse41(Mr, xs, ys)
    g = fundamental_tensor(M, xs, ys)
    res = np.max(np.abs(gi @ g - np.eye(g.shape[-1])))
    return Outcome(float(res), {"samples": len(xs), "m": root_degree(M)})


def check_rationality(fx: Fixture, cfg: SuiteConfig, rng) -> Outcome:
    M = fx.metric
    seed = int(rng.integers(0, 2**63))
    certs = certify_targets(M, rationality_targets(dimension(M)), seed=seed)
    ok = all(c.verdict == "pass" for c in certs)
    bad = sum(c.holdoutResidual for c in certs)
    return Outcome(
        float(bad if ok else max(bad, 1)),
        {
            "targets": {
                c.target: {"verdict": c.verdict, "degrees": [c.numDegree, c.denDegree], "holdout_failures": int(c.holdoutResidual)}
                for c in certs
            },
            "samples": max(c.samples for c in certs),
            "mode": "exact",
        },
        passed=ok,
    )


def check_theorem1(fx: Fixture, cfg: SuiteConfig, rng) -> Outcome:
    M = fx.metric
    tol = cfg.tolerance("theorem1")
    x = _base_points(fx, 1, rng)[0]
    n = dimension(M)
    ys = sample_cone(M, x, max(cfg.samples, n + 6), rng)
    v = theorem1_check(M, x, ys, tol=tol)
    residual = 0.0 if v.consistent else v.max_abs_r
    return Outcome(
        residual,
        {"verdict": v.verdict, "max_abs_r": _num(v.max_abs_r), "fit_residual": _num(v.fit_residual)},
        passed=v.consistent,
    )


def check_proofchain(fx: Fixture, cfg: SuiteConfig, rng) -> Outcome:
    inst: ProofInstance = fx.data
    s410 = verify_step410(inst.n, [inst])
    s412 = verify_step412(inst.n, [inst])
    ok = s410.passed and s412.passed
    return Outcome(0.0 if ok else 1.0, {"hessian_contraction": s410.passed, "gradient_contraction": s412.passed})


def check_case(fx: Fixture, cfg: SuiteConfig, rng) -> Outcome:
    inst: ProofInstance = fx.data
    v = case_analysis(inst)
    ok = v.verdict in CASE_VERDICTS
    h = solve_for_h(inst)
    if h is not None and inst.f != 0:
        ok &= v.verdict == "CaseII-infeasible"
    if fx.expect is not None:
        ok &= v.verdict == fx.expect
    details = {"verdict": v.verdict, "f": str(v.f), "h": None if v.h is None else str(v.h), "routes": list(v.routes)}
    if fx.expect is not None:
        details["expected"] = fx.expect
    return Outcome(0.0 if ok else 1.0, details)


def check_homothety(fx: Fixture, cfg: SuiteConfig, rng) -> Outcome:
    D: ConformalData = fx.data
    probes = _base_points(fx, max(8, cfg.samples), rng)
    h = homothety_test(D.kappa, probes, tol=cfg.tolerance("homothety"))
    M = make_conformal(D)
    x = probes[0]
    ys = sample_cone(M, x, max(cfg.samples, D.n + 6), rng)
    r = curvature_bundle(M, np.broadcast_to(x, ys.shape), ys).scalarR
    F = eval_F(M, np.broadcast_to(x, ys.shape), ys).value
    fit = fit_weakly_isotropic(ys, r, F, D.n)
    scale = max(1.0, float(np.max(np.abs(r))))
    isotropic = fit.residual / scale <= cfg.tolerance("theorem1")
    ok = h.homothetic or not isotropic
    return Outcome(
        0.0 if ok else h.max_grad,
        {"verdict": h.verdict, "max_grad_kappa": _num(h.max_grad), "weakly_isotropic": isotropic},
        passed=ok,
    )


Applies = Callable[[Fixture], bool]

CHECKS: dict[str, tuple[Applies, Callable]] = {
    "positivity-24-27": (lambda f: _is_cubic(f.metric), check_positivity),
    "spray-cross-check": (lambda f: _is_cubic(f.metric), check_spray),
    "minkowski-flatness": (lambda f: f.metric is not None and is_constant_coefficient(f.metric), check_flatness),
    "conformal-identities-33": (lambda f: f.kind == "conformal" and _is_cubic(f.data.base), check_conformal),
    "inverse-41": (lambda f: _m_family(f.metric), check_inverse),
    "rationality-lemma-24": (lambda f: f.metric is not None and _rational_constant(f.metric), check_rationality),
    "theorem1": (lambda f: _m_family(f.metric), check_theorem1),
    "proofchain-410-412": (lambda f: f.kind == "proof", check_proofchain),
    "case-analysis": (lambda f: f.kind == "proof", check_case),
    "homothety": (lambda f: f.kind == "conformal", check_homothety),
}


# report ------------------------------------------------------------------------------


def _num(v):
    """Float rounded to 12 significant digits (stable across runs)."""
    v = float(v)
    if not math.isfinite(v):
        return str(v)
    return float(f"{v:.12g}")


def run_suite(cfg: SuiteConfig) -> dict:
    entries = []
    for check in cfg.checks:
        applies, fn = CHECKS[check]
        tol = cfg.tolerance(check)
        for fx in cfg.fixtures:
            if not applies(fx):
                continue
            rng = check_rng(cfg.seed, check, fx.name)
            entry = {"name": check, "fixture": fx.name, "tolerance": tol}
            try:
                out = fn(fx, cfg, rng)
            except (FinslerError, ValueError, ZeroDivisionError, np.linalg.LinAlgError) as err:
                entry.update(status="error", **{"worst-residual": None}, details={"error": f"{type(err).__name__}: {err}"})
            else:
                ok = out.residual <= tol if out.passed is None else out.passed
                entry.update(status="pass" if ok else "fail", **{"worst-residual": _num(out.residual)}, details=out.details)
            entries.append(entry)
    entries.sort(key=lambda e: (e["name"], e["fixture"]))
    summary = {k: sum(e["status"] == k for e in entries) for k in ("pass", "fail", "error")}
    summary["total"] = len(entries)
    return {"version": __version__, "seed": cfg.seed, "entries": entries, "summary": summary}


def report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def report_markdown(report: dict) -> str:
    lines = [
        f"# finslerlab check report (version {report['version']}, seed {report['seed']})",
        "",
        "| check | fixture | status | worst residual | tolerance |",
        "|---|---|---|---|---|",
    ]
    for e in report["entries"]:
        wr = e["worst-residual"]
        lines.append(
            f"| {e['name']} | {e['fixture']} | {e['status']} | {'-' if wr is None else f'{wr:.3e}'} | {e['tolerance']:g} |"
        )
    s = report["summary"]
    lines += ["", f"**{s['pass']} passed, {s['fail']} failed, {s['error']} errors** ({s['total']} total)", ""]
    return "\n".join(lines)


def exit_code(report: dict) -> int:
    s = report["summary"]
    return 0 if s["fail"] == 0 and s["error"] == 0 else 1
