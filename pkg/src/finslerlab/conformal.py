"""Conformal changes F = exp(kappa(x)) * F~ of a locally Minkowski metric."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .curvature import christoffel, cov_deriv_bundle, metric_and_derivatives, one_form_and_derivatives
from .errors import ConfigError, NotMinkowskiError
from .exprlang import BinOp, Call, Expr, const, eval_jet, fold_constant, parse, to_text
from .jets import jet_space
from .metrics import (
    CubicSpec,
    MetricSpec,
    MRootSpec,
    OneFormSpec,
    RiemannSpec,
    dimension,
    is_constant_coefficient,
    metric_from_dict,
    metric_to_dict,
)

HOMOTHETY_TOL = 1e-9


@dataclass(frozen=True)
class ConformalData:
    base: MetricSpec
    kappa: Expr

    def __post_init__(self):
        if not is_constant_coefficient(self.base):
            raise NotMinkowskiError("the base metric of a conformal change must have constant coefficients")
        bad = [v for v in self.kappa.variables() if v > dimension(self.base)]
        if bad:
            raise ConfigError(f"kappa uses x{max(bad)} but the base metric has dimension {dimension(self.base)}")

    @property
    def n(self) -> int:
        return dimension(self.base)


def conformal_from_dict(d: dict) -> ConformalData:
    try:
        base = metric_from_dict(d["base"])
        kappa = d["kappa"]
    except KeyError as err:
        raise ConfigError(f"conformal data needs key {err.args[0]!r}") from None
    kappa = parse(str(kappa), dimension(base))
    return ConformalData(base, kappa)


def conformal_to_dict(D: ConformalData) -> dict:
    return {"base": metric_to_dict(D.base), "kappa": to_text(D.kappa)}


def load_conformal(path) -> ConformalData:
    with open(path) as fh:
        return conformal_from_dict(json.load(fh))


def _weighted(e: Expr, factor: Expr | None) -> Expr:
    v = fold_constant(e)
    if factor is None or (v is not None and v == 0):
        return e
    if v is not None and v == 1:
        return factor
    return BinOp("*", factor, e)


def _exp_factor(kappa: Expr, weight: int) -> Expr | None:
    k = fold_constant(kappa)
    if k is not None and k == 0:
        return None
    arg = kappa if weight == 1 else BinOp("*", const(weight), kappa)
    return Call("exp", arg)


def _scale_riemann(alpha: RiemannSpec, factor) -> RiemannSpec:
    n = alpha.n
    return RiemannSpec(n, tuple(tuple(_weighted(alpha.a[i][j], factor) for j in range(n)) for i in range(n)))


def make_conformal(D: ConformalData) -> MetricSpec:
    """Metric with a_ij -> e^{2k} a_ij, b_i -> e^{k} b_i, m-tensor -> e^{mk} tensor."""
    base, kappa = D.base, D.kappa
    if isinstance(base, RiemannSpec):
        return _scale_riemann(base, _exp_factor(kappa, 2))
    if isinstance(base, CubicSpec):
        f1 = _exp_factor(kappa, 1)
        beta = OneFormSpec(tuple(_weighted(e, f1) for e in base.beta.b))
        return CubicSpec(_scale_riemann(base.alpha, _exp_factor(kappa, 2)), beta, base.p, base.q)
    fm = _exp_factor(kappa, base.m)
    return MRootSpec(base.n, base.m, tuple((idx, _weighted(e, fm)) for idx, e in base.entries))


def _kappa_derivatives(kappa: Expr, x, n):
    """kappa, its gradient and Hessian at x (batch-first)."""
    x = np.asarray(x, dtype=float)
    j = eval_jet(kappa, x, space=jet_space(n, 2))
    unit = np.eye(n, dtype=int)
    grad = np.stack([j.partial(tuple(unit[i])) for i in range(n)], axis=-1)
    hess = np.empty(x.shape[:-1] + (n, n))
    for i in range(n):
        for k in range(i, n):
            hess[..., i, k] = hess[..., k, i] = j.partial(tuple(unit[i] + unit[k]))
    return np.broadcast_to(j.value, x.shape[:-1]), grad, hess


@dataclass(frozen=True)
class ConformalScalars:
    k: np.ndarray
    k_i: np.ndarray
    k_ij: np.ndarray
    k_up: np.ndarray
    b_up: np.ndarray | None
    f: np.ndarray | None
    f1: np.ndarray | None
    f2: np.ndarray | None
    k0: np.ndarray
    k00: np.ndarray
    gradNormSq: np.ndarray


def _base_alpha(base: MetricSpec) -> RiemannSpec | None:
    if isinstance(base, RiemannSpec):
        return base
    if isinstance(base, CubicSpec):
        return base.alpha
    return None


def conformal_scalars(D: ConformalData, x, y) -> ConformalScalars:
    """Derivatives of kappa and their contractions with the base data; raising uses a~.

    For an m-th root base there is no a~, so indices are raised with the
    identity and the b~-terms are omitted.
    """
    n = D.n
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    k, ki, kij = _kappa_derivatives(D.kappa, x, n)
    alpha = _base_alpha(D.base)
    ainv = np.linalg.inv(metric_and_derivatives(alpha, x)[0]) if alpha else np.broadcast_to(np.eye(n), kij.shape)
    kup = np.einsum("...ij,...j->...i", ainv, ki)
    b_up = f = f1 = f2 = None
    if isinstance(D.base, CubicSpec):
        b, _ = one_form_and_derivatives(D.base.beta, x)
        b_up = np.einsum("...ij,...j->...i", ainv, b)
        f = np.einsum("...i,...i->...", b, kup)
        f1 = np.einsum("...ij,...i,...j->...", kij, b_up, y)
        f2 = np.einsum("...ij,...i,...j->...", kij, b_up, b_up)
    return ConformalScalars(
        k=k,
        k_i=ki,
        k_ij=kij,
        k_up=kup,
        b_up=b_up,
        f=f,
        f1=f1,
        f2=f2,
        k0=np.einsum("...i,...i->...", ki, y),
        k00=np.einsum("...ij,...i,...j->...", kij, y, y),
        gradNormSq=np.einsum("...i,...i->...", ki, kup),
    )


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    lhs: np.ndarray
    rhs: np.ndarray
    residual: float
    passed: bool


def verify_conformal_identities(D: ConformalData, x, y, tol: float = 1e-7) -> list[IdentityCheck]:
    """Both sides of the eight transformation laws at a single (x, y).

    Left sides come from the transformed metric through the covariant
    derivative bundle; right sides from base quantities and kappa.  The
    residual is the max deviation divided by max(1, |lhs|).
    """
    if not isinstance(D.base, CubicSpec):
        raise ConfigError("the conformal identities concern (alpha, beta) bases; use a cubic base")
    n = D.n
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    M = make_conformal(D)
    base = D.base
    new = cov_deriv_bundle(M.alpha, M.beta, x, y)
    old = cov_deriv_bundle(base.alpha, base.beta, x, y)
    cs = conformal_scalars(D, x, y)
    e = np.exp(cs.k)
    at, _ = metric_and_derivatives(base.alpha, x)
    bt, _ = one_form_and_derivatives(base.beta, x)
    ki, kup, f = cs.k_i, cs.k_up, cs.f
    B = float(bt @ cs.b_up)
    delta = np.eye(n)

    lines = []

    def add(name, lhs, rhs):
        lhs = np.asarray(lhs, dtype=float)
        rhs = np.asarray(rhs, dtype=float)
        dev = float(np.max(np.abs(lhs - rhs))) / max(1.0, float(np.max(np.abs(lhs))))
        lines.append(IdentityCheck(name, lhs, rhs, dev, dev <= tol))

    add("b_i|j", new.b_cov, e * (old.b_cov - np.outer(ki, bt) + f * at))
    add(
        "christoffel",
        christoffel(M.alpha, x),
        christoffel(base.alpha, x)
        + np.einsum("j,li->lij", ki, delta)
        + np.einsum("i,lj->lij", ki, delta)
        - np.einsum("l,ij->lij", kup, at),
    )
    add("r_ij", new.r_ij, e * old.r_ij + 0.5 * e * (-np.outer(ki, bt) - np.outer(bt, ki) + 2 * f * at))
    add("s_ij", new.s_ij, e * old.s_ij + 0.5 * e * (np.outer(bt, ki) - np.outer(ki, bt)))
    add(
        "r_i,r",
        np.append(new.r_i, new.r),
        np.append(old.r_i + 0.5 * (f * bt - B * ki), np.exp(-cs.k) * old.r),
    )
    add("s_i", new.s_i, old.s_i + 0.5 * (B * ki - f * bt))
    add("r^i_i", np.trace(new.r_up), np.exp(-cs.k) * np.trace(old.r_up) + np.exp(-cs.k) * (n - 1) * f)
    add(
        "s^j_i",
        new.s_up,
        np.exp(-cs.k) * old.s_up + 0.5 * np.exp(-cs.k) * (np.outer(cs.b_up, ki) - np.outer(kup, bt)),
    )
    return lines


@dataclass(frozen=True)
class HomothetyVerdict:
    homothetic: bool
    max_grad: float
    verdict: str


def homothety_test(kappa: Expr, probes, tol: float = HOMOTHETY_TOL) -> HomothetyVerdict:
    """Homothetic iff the Euclidean norm of grad kappa stays below tol on every probe."""
    probes = np.asarray(probes, dtype=float)
    if probes.ndim != 2 or len(probes) == 0:
        raise ValueError("homothety test needs a non-empty list of probe points")
    if len(probes) < 8:
        raise ValueError(f"homothety test needs at least 8 probe points, got {len(probes)}")
    n = probes.shape[1]
    if fold_constant(kappa) is not None:
        g = 0.0
    else:
        _, grad, _ = _kappa_derivatives(kappa, probes, n)
        g = float(np.max(np.linalg.norm(grad, axis=-1)))
    ok = g < tol
    return HomothetyVerdict(ok, g, "homothetic" if ok else "not-homothetic")
