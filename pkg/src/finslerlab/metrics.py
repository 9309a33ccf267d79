"""Finsler metric specifications and their pointwise evaluation.

Three families are supported: Riemannian metrics ``F = alpha``, cubic
(alpha, beta)-metrics ``F = (p beta alpha^2 + q beta^3)^(1/3)`` and general
m-th root metrics ``F = (a_{i1..im} y^i1 ... y^im)^(1/m)``.  All three are
evaluated through their radicand ``P = F^m``, a polynomial in y whose
coefficients are expressions in x.

Points are arrays of shape ``(n,)`` or ``(*batch, n)``; jets live in ``2n``
variables with the x block first and the y block second.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations_with_replacement
from pathlib import Path
from typing import Union

import numpy as np

from .errors import ConeDomainError, ConfigError, DefinitenessError, ParameterError, SamplingError
from .exprlang import BinOp, Expr, Num, const, eval_jet, fold_constant, parse, to_text
from .fields import FLOAT, Field
from .jets import Jet, apply_smooth, jet_space

PIVOT_TOL = 1e-10
COND_LIMIT = 1e12


def _check_square(a, n, what):
    if len(a) != n or any(len(row) != n for row in a):
        raise ValueError(f"{what} must be {n}x{n}")


@dataclass(frozen=True)
class RiemannSpec:
    n: int
    a: tuple

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("dimension must be at least 3")
        _check_square(self.a, self.n, "a")
        for i in range(self.n):
            for j in range(i):
                if self.a[i][j] != self.a[j][i]:
                    raise ValueError(f"a is not symmetric at ({i + 1},{j + 1})")


@dataclass(frozen=True)
class OneFormSpec:
    b: tuple


@dataclass(frozen=True)
class CubicSpec:
    alpha: RiemannSpec
    beta: OneFormSpec
    p: Fraction
    q: Fraction

    def __post_init__(self):
        if len(self.beta.b) != self.alpha.n:
            raise ValueError("b must have one component per dimension")
        object.__setattr__(self, "p", Fraction(self.p))
        object.__setattr__(self, "q", Fraction(self.q))

    @property
    def n(self):
        return self.alpha.n


@dataclass(frozen=True)
class MRootSpec:
    n: int
    m: int
    entries: tuple  # ((sorted 0-based index tuple, Expr), ...)

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("m must be at least 2")
        if self.n < 3:
            raise ValueError("dimension must be at least 3")
        for idx, _ in self.entries:
            if len(idx) != self.m or list(idx) != sorted(idx) or not all(0 <= i < self.n for i in idx):
                raise ValueError(f"bad tensor index {idx}")

    def component(self, idx) -> Expr:
        key = tuple(sorted(idx))
        for k, e in self.entries:
            if k == key:
                return e
        return Num(Fraction(0))


MetricSpec = Union[RiemannSpec, CubicSpec, MRootSpec]


def dimension(M: MetricSpec) -> int:
    return M.n


def root_degree(M: MetricSpec) -> int:
    if isinstance(M, RiemannSpec):
        return 2
    if isinstance(M, CubicSpec):
        return 3
    return M.m


def coefficient_exprs(M: MetricSpec) -> list[Expr]:
    if isinstance(M, RiemannSpec):
        return [e for row in M.a for e in row]
    if isinstance(M, CubicSpec):
        return [e for row in M.alpha.a for e in row] + list(M.beta.b)
    return [e for _, e in M.entries]


def is_constant_coefficient(M: MetricSpec) -> bool:
    return all(not e.variables() for e in coefficient_exprs(M))


# convenience constructors ---------------------------------------------------


def _expr(v, n):
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, Fraction)):
        return const(v)
    return parse(str(v), n)


def riemannian(a, n=None) -> RiemannSpec:
    n = n or len(a)
    rows = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            v = a[i][j] if j < len(a[i]) else None
            if v is None or v == "":
                continue
            rows[i][j] = _expr(v, n)
    for i in range(n):
        for j in range(n):
            if rows[i][j] is None:
                rows[i][j] = rows[j][i]
            elif rows[j][i] is not None and rows[j][i] != rows[i][j]:
                raise ConfigError(f"conflicting symmetric entries a[{i + 1}][{j + 1}] and a[{j + 1}][{i + 1}]")
            if rows[i][j] is None:
                rows[i][j] = Num(Fraction(0))
    return RiemannSpec(n, tuple(tuple(r) for r in rows))


def euclidean(n: int) -> RiemannSpec:
    return riemannian([[int(i == j) for j in range(n)] for i in range(n)])


def cubic(a, b, p, q) -> CubicSpec:
    alpha = a if isinstance(a, RiemannSpec) else riemannian(a)
    beta = OneFormSpec(tuple(_expr(v, alpha.n) for v in b))
    return CubicSpec(alpha, beta, Fraction(p), Fraction(q))


def mroot(n: int, m: int, tensor: dict) -> MRootSpec:
    """m-th root metric from {index tuple (0-based) or key string (1-based): expr}."""
    entries: dict = {}
    for key, val in tensor.items():
        idx = _tensor_key(key, n, m) if isinstance(key, str) else tuple(key)
        srt = tuple(sorted(idx))
        e = _expr(val, n)
        if srt in entries and entries[srt] != e:
            raise ConfigError(f"conflicting symmetric tensor entries for index {tuple(i + 1 for i in srt)}")
        entries[srt] = e
    items = tuple(sorted((k, v) for k, v in entries.items() if fold_constant(v) != 0))
    return MRootSpec(n, m, items)


def _tensor_key(key: str, n: int, m: int):
    parts = key.split(",") if "," in key else list(key.strip())
    try:
        idx = tuple(int(p) - 1 for p in parts)
    except ValueError:
        raise ConfigError(f"bad tensor key {key!r}") from None
    if len(idx) != m or not all(0 <= i < n for i in idx):
        raise ConfigError(f"tensor key {key!r} does not name {m} indices in 1..{n}")
    return idx


def _sym_mul(*factors):
    out = factors[0]
    for f in factors[1:]:
        out = BinOp("*", out, f)
    return out


def cubic_to_mroot(C: CubicSpec) -> MRootSpec:
    """Same metric written as a cubic form a_ijk = p a_(ij b_k) + q b_i b_j b_k."""
    n = C.n
    a, b = C.alpha.a, C.beta.b
    tensor = {}
    for i, j, k in combinations_with_replacement(range(n), 3):
        terms = []
        if C.p:
            sym = BinOp(
                "+",
                BinOp("+", _sym_mul(a[i][j], b[k]), _sym_mul(a[j][k], b[i])),
                _sym_mul(a[i][k], b[j]),
            )
            terms.append(_sym_mul(const(C.p / 3), sym))
        if C.q:
            terms.append(_sym_mul(const(C.q), b[i], b[j], b[k]))
        if terms:
            tensor[(i, j, k)] = terms[0] if len(terms) == 1 else BinOp("+", terms[0], terms[1])
    return mroot(n, 3, tensor)


def multiplicity(idx) -> int:
    counts = Counter(idx)
    return math.factorial(len(idx)) // math.prod(math.factorial(c) for c in counts.values())


# file format -----------------------------------------------------------------


def metric_from_dict(d: dict) -> MetricSpec:
    try:
        n = int(d["dimension"])
        kind = d["type"]
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigError(f"metric spec needs 'dimension' and 'type': {err}") from None
    try:
        if kind == "riemannian":
            return riemannian(d["a"], n)
        if kind == "cubic":
            return cubic(riemannian(d["a"], n), d["b"], Fraction(str(d["p"])), Fraction(str(d["q"])))
        if kind == "mroot":
            return mroot(n, int(d["m"]), d["tensor"])
    except KeyError as err:
        raise ConfigError(f"{kind} metric spec is missing field {err}") from None
    raise ConfigError(f"unknown metric type {kind!r}")


def metric_to_dict(M: MetricSpec) -> dict:
    if isinstance(M, RiemannSpec):
        return {"dimension": M.n, "type": "riemannian", "a": [[to_text(e) for e in row] for row in M.a]}
    if isinstance(M, CubicSpec):
        return {
            "dimension": M.n,
            "type": "cubic",
            "a": [[to_text(e) for e in row] for row in M.alpha.a],
            "b": [to_text(e) for e in M.beta.b],
            "p": str(M.p),
            "q": str(M.q),
        }
    return {
        "dimension": M.n,
        "type": "mroot",
        "m": M.m,
        "tensor": {",".join(str(i + 1) for i in k): to_text(e) for k, e in M.entries},
    }


def load_metric(path) -> MetricSpec:
    with open(Path(path)) as fh:
        return metric_from_dict(json.load(fh))


# evaluation ------------------------------------------------------------------


def _points(x, y, n, field: Field):
    dtype = float if field is FLOAT else object
    x = np.asarray(x, dtype=dtype)
    y = np.asarray(y, dtype=dtype)
    if x.shape[-1] != n or y.shape[-1] != n:
        raise ValueError(f"x and y must have {n} components")
    x, y = np.broadcast_arrays(x, y)
    return np.array(x), np.array(y)


class _Ctx:
    """Shared state while building jets of metric data at a batch of points."""

    def __init__(self, n, x, y, space, field):
        self.n, self.x, self.y, self.space, self.field = n, x, y, space, field
        self.cache: dict = {}
        self.batch = x.shape[:-1]

    def coef(self, e: Expr):
        v = fold_constant(e)
        if v is not None:
            return v
        return eval_jet(e, self.x, space=self.space, field=self.field, _cache=self.cache)

    def y_jets(self):
        return [Jet.variable(self.space, self.n + i, self.field.coerce(self.y[..., i]), self.field) for i in range(self.n)]

    def zero(self):
        return Jet.constant(self.space, 0, self.field, self.batch)


def _quadratic(ctx, a, Y):
    n = ctx.n
    out = ctx.zero()
    for i in range(n):
        for j in range(i, n):
            c = ctx.coef(a[i][j])
            if isinstance(c, Fraction) and c == 0:
                continue
            w = c if i == j else 2 * c
            out = out + (Y[i] * Y[j]) * w
    return out


def _linear(ctx, b, Y):
    out = ctx.zero()
    for i in range(ctx.n):
        c = ctx.coef(b[i])
        if isinstance(c, Fraction) and c == 0:
            continue
        out = out + Y[i] * c
    return out


def _radicand(M: MetricSpec, ctx: _Ctx) -> Jet:
    Y = ctx.y_jets()
    if isinstance(M, RiemannSpec):
        return _quadratic(ctx, M.a, Y)
    if isinstance(M, CubicSpec):
        alpha2 = _quadratic(ctx, M.alpha.a, Y)
        beta = _linear(ctx, M.beta.b, Y)
        return beta * (alpha2 * M.p + beta * beta * M.q)
    out = ctx.zero()
    prefix: dict = {(): None}
    for idx, e in M.entries:
        c = ctx.coef(e)
        mono = _monomial(idx, Y, prefix)
        out = out + mono * (c * multiplicity(idx))
    return out


def _monomial(idx, Y, cache):
    if idx in cache and cache[idx] is not None:
        return cache[idx]
    if len(idx) == 1:
        val = Y[idx[0]]
    else:
        val = _monomial(idx[:-1], Y, cache) * Y[idx[-1]]
    cache[idx] = val
    return val


def radicand_jet(M: MetricSpec, x, y, space, field: Field = FLOAT) -> Jet:
    """Jet of P = F^m in the 2n variables (x, y)."""
    n = dimension(M)
    x, y = _points(x, y, n, field)
    return _radicand(M, _Ctx(n, x, y, space, field))


def radicand_value(M: MetricSpec, x, y) -> np.ndarray:
    n = dimension(M)
    xf, yf = _points(_to_float(x), _to_float(y), n, FLOAT)
    return radicand_jet(M, xf, yf, jet_space(2 * n, 0)).value


def _to_float(v):
    arr = np.asarray(v)
    if arr.dtype == object:
        return np.vectorize(float, otypes=[float])(arr)
    return arr.astype(float)


def _cone_check(P0):
    bad = ~(P0 > 0)
    if np.any(bad):
        raise ConeDomainError(f"radicand {np.ravel(P0)[np.ravel(bad)][0]:.6g} <= 0: direction outside the metric's cone")


def f2_jet(M: MetricSpec, x, y, order: int, *, field: Field = FLOAT, xcap=None, normalize=None):
    """Jet of F^2, returned as ``(jet, scale)`` with ``F^2 = scale * jet``.

    In exact fields (and whenever ``normalize`` is true) F^2 is divided by
    its value at the expansion point so that fractional powers stay exact;
    ``scale`` is then that value as a float.
    """
    n = dimension(M)
    m = root_degree(M)
    caps = ((0, n, xcap),) if xcap is not None else ()
    space = jet_space(2 * n, order, caps)
    P = radicand_jet(M, x, y, space, field)
    P0 = P.value if field is FLOAT else radicand_value(M, x, y)
    _cone_check(P0)
    if normalize is None:
        normalize = field.exact and m != 2
    if m == 2:
        return P, np.ones(np.shape(P0))
    if normalize:
        jet = apply_smooth("pow", P / P.value, Fraction(2, m))
        return jet, P0 ** (2.0 / m)
    return apply_smooth("pow", P, Fraction(2, m)), np.ones(np.shape(P0))


def eval_F(M: MetricSpec, x, y, order: int = 0, *, field: Field = FLOAT) -> Jet:
    """Jet of F in all 2n variables; value is positively 1-homogeneous in y."""
    n = dimension(M)
    if isinstance(M, (RiemannSpec, CubicSpec)):
        alpha = M if isinstance(M, RiemannSpec) else M.alpha
        xf, _ = _points(_to_float(x), _to_float(y), n, FLOAT)
        check_positive_definite(riemann_matrix(alpha, xf), "a_ij")
    space = jet_space(2 * n, order)
    P = radicand_jet(M, x, y, space, field)
    P0 = P.value if field is FLOAT else radicand_value(M, x, y)
    _cone_check(P0)
    return apply_smooth("pow", P, Fraction(1, root_degree(M)))


def riemann_matrix(alpha: RiemannSpec, x) -> np.ndarray:
    """Float values a_ij(x), shape (*batch, n, n)."""
    x = np.asarray(x, dtype=float)
    n = alpha.n
    vals = {}
    out = np.empty(x.shape[:-1] + (n, n))
    for i in range(n):
        for j in range(i, n):
            e = alpha.a[i][j]
            v = fold_constant(e)
            if v is None:
                v = eval_jet(e, x, space=jet_space(n, 0), _cache=vals).value
            out[..., i, j] = out[..., j, i] = v
    return out


def one_form_vector(beta: OneFormSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape[:-1] + (len(beta.b),))
    for i, e in enumerate(beta.b):
        v = fold_constant(e)
        out[..., i] = v if v is not None else eval_jet(e, x, space=jet_space(x.shape[-1], 0)).value
    return out


def beta_norm_sq(C: CubicSpec, x) -> np.ndarray:
    """B = a^{ij} b_i b_j, computed pointwise from the coefficient data."""
    a = riemann_matrix(C.alpha, x)
    b = one_form_vector(C.beta, x)
    return np.einsum("...i,...i->...", b, np.linalg.solve(a, b[..., None])[..., 0])


def leading_pivots(g: np.ndarray) -> np.ndarray:
    """Pivots of unpivoted Gaussian elimination, shape (*batch, n)."""
    a = np.array(g, dtype=float)
    n = a.shape[-1]
    piv = np.empty(a.shape[:-1])
    for k in range(n):
        piv[..., k] = a[..., k, k]
        if k + 1 < n:
            with np.errstate(divide="ignore", invalid="ignore"):
                fac = a[..., k + 1 :, k] / a[..., k : k + 1, k]
                a[..., k + 1 :, :] -= fac[..., None] * a[..., k : k + 1, :]
    return piv


def is_positive_definite(g: np.ndarray, tol: float = PIVOT_TOL) -> np.ndarray:
    piv = leading_pivots(g)
    scale = np.max(np.abs(np.diagonal(g, axis1=-2, axis2=-1)), axis=-1)
    return np.all(piv > tol * scale[..., None], axis=-1)


def check_positive_definite(g: np.ndarray, what: str = "g_ij"):
    ok = is_positive_definite(g)
    if not np.all(ok):
        piv = leading_pivots(g)
        raise DefinitenessError(f"{what} is not positive definite (smallest pivot {np.min(piv):.3g})")


def fundamental_tensor(M: MetricSpec, x, y, *, check: bool = True) -> np.ndarray:
    """g_ij = [F^2/2]_{y^i y^j}, shape (*batch, n, n)."""
    n = dimension(M)
    F2, _ = f2_jet(M, x, y, 2, xcap=0)
    g = np.empty(F2.batch_shape + (n, n))
    for i in range(n):
        for j in range(i, n):
            alpha = [0] * (2 * n)
            alpha[n + i] += 1
            alpha[n + j] += 1
            g[..., i, j] = g[..., j, i] = 0.5 * F2.partial(alpha)
    if check:
        check_positive_definite(g)
    return g


def inverse_fundamental_tensor(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    cond = np.linalg.cond(g)
    if np.any(~np.isfinite(cond)) or np.any(cond >= COND_LIMIT):
        raise DefinitenessError(f"fundamental tensor is near singular (condition number {np.max(cond):.3g})")
    return np.linalg.inv(g)


def in_cone(M: MetricSpec, x, y) -> np.ndarray:
    """Directions where the radicand is positive and g is positive definite."""
    n = dimension(M)
    xf, yf = _points(_to_float(x), _to_float(y), n, FLOAT)
    P0 = radicand_value(M, xf, yf)
    ok = P0 > 0
    if isinstance(M, (RiemannSpec, CubicSpec)):
        alpha = M if isinstance(M, RiemannSpec) else M.alpha
        ok &= is_positive_definite(riemann_matrix(alpha, xf))
    if np.any(ok):
        g = fundamental_tensor(M, xf[ok], yf[ok], check=False)
        good = is_positive_definite(g)
        ok[ok] = good
    return ok


def sample_cone(M: MetricSpec, x, count: int, rng: np.random.Generator, max_tries: int = 1000) -> np.ndarray:
    """`count` unit directions in the cone at x, rejection-sampled uniformly on the sphere."""
    n = dimension(M)
    x = np.asarray(x, dtype=float)
    out: list = []
    tries = 0
    while len(out) < count:
        need = count - len(out)
        y = rng.standard_normal((max(2 * need, 8), n))
        y /= np.linalg.norm(y, axis=1, keepdims=True)
        xx = np.broadcast_to(x, y.shape) if x.ndim == 1 else x[: len(y)]
        ok = in_cone(M, xx, y)
        out.extend(y[ok][:need])
        tries += len(y)
        if tries > max_tries * count and len(out) < count:
            raise SamplingError(f"cone sampling accepted {len(out)}/{count} directions after {tries} draws")
    return np.array(out)


# (alpha, beta) profile and positivity -----------------------------------------


def phi_derivatives(p, q, s):
    """phi(s) = (p s + q s^3)^(1/3) and its first two derivatives."""
    s = np.asarray(s, dtype=float)
    space = jet_space(1, 2)
    sj = Jet.variable(space, 0, s)
    u = sj * float(p) + sj * sj * sj * float(q)
    phi = apply_smooth("cbrt", u)
    return phi.value, phi.partial((1,)), phi.partial((2,))


@dataclass(frozen=True)
class PositivityResult:
    value: np.ndarray
    verdict: np.ndarray
    identity_residual: np.ndarray | None = None


def _t_value(phi, dphi, ddphi, B, s):
    return phi - s * dphi + (B - s * s) * ddphi


def positivity24(phi, dphi, ddphi, B, s) -> PositivityResult:
    """T = phi - s phi' + (B - s^2) phi''; positive definiteness needs T > 0."""
    B = np.asarray(B, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(B < 0) or np.any(np.abs(s) > np.sqrt(np.maximum(B, 0)) * (1 + 1e-12) + 1e-300):
        raise ParameterError("need |s| <= sqrt(B)")
    T = _t_value(phi, dphi, ddphi, B, s)
    return PositivityResult(T, T > 0)


def cubic_positivity27(p, q, B, s) -> PositivityResult:
    """phi^-5 [-p^2 B + p (4p + 3qB) s^2] for the cubic profile.

    The identity (9/2) phi^5 T = p[(4p + 3qB) s^2 - pB] is evaluated alongside
    and its relative residual returned.
    """
    p, q = float(p), float(q)
    B = np.asarray(B, dtype=float)
    s = np.asarray(s, dtype=float)
    u = p * s + q * s**3
    if np.any(u == 0):
        raise ConeDomainError("phi(s) = 0")
    phi, dphi, ddphi = phi_derivatives(p, q, s)
    bracket = -p * p * B + p * (4 * p + 3 * q * B) * s * s
    value = bracket / phi**5
    T = _t_value(phi, dphi, ddphi, B, s)
    lhs = 4.5 * phi**5 * T
    denom = np.maximum(np.maximum(np.abs(bracket), np.abs(lhs)), np.finfo(float).tiny)
    return PositivityResult(value, value > 0, np.abs(lhs - bracket) / denom)


__all__ = [
    "RiemannSpec",
    "OneFormSpec",
    "CubicSpec",
    "MRootSpec",
    "MetricSpec",
    "riemannian",
    "euclidean",
    "cubic",
    "mroot",
    "cubic_to_mroot",
    "metric_from_dict",
    "metric_to_dict",
    "load_metric",
    "eval_F",
    "f2_jet",
    "radicand_jet",
    "fundamental_tensor",
    "inverse_fundamental_tensor",
    "positivity24",
    "cubic_positivity27",
    "phi_derivatives",
    "in_cone",
    "sample_cone",
    "beta_norm_sq",
]
