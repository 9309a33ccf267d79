"""m-th root metrics: the A tensor, the closed-form inverse of g, rationality
certification and the scalar-curvature dichotomy for weak isotropy."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .curvature import curvature_bundle, exact_invariants, fit_weakly_isotropic
from .errors import ConeDomainError, DefinitenessError, InconclusiveFitError, SamplingError
from .fields import FLOAT, MOD_P, ModularField
from .jets import _compositions, jet_space
from .metrics import (
    CubicSpec,
    MetricSpec,
    _points,
    cubic_to_mroot,
    dimension,
    eval_F,
    in_cone,
    radicand_jet,
    root_degree,
    sample_cone,
)

DEGREE_CAP = 24


def as_mroot(M: MetricSpec) -> MetricSpec:
    return cubic_to_mroot(M) if isinstance(M, CubicSpec) else M


@dataclass(frozen=True)
class ATensor:
    A: np.ndarray
    Ainv: np.ndarray


def a_tensor(M: MetricSpec, x, y) -> ATensor:
    """A_ij = 1/(m(m-1)) d^2 F^m / dy^i dy^j, batch-first."""
    n, m = dimension(M), root_degree(M)
    xf, yf = _points(x, y, n, FLOAT)
    P = radicand_jet(M, xf, yf, jet_space(2 * n, 2, ((0, n, 0),)))
    if np.any(~(P.value > 0)):
        raise ConeDomainError("direction outside the metric's cone")
    A = np.empty(P.batch_shape + (n, n))
    for i in range(n):
        for j in range(i, n):
            alpha = [0] * (2 * n)
            alpha[n + i] += 1
            alpha[n + j] += 1
            A[..., i, j] = A[..., j, i] = P.partial(alpha) / (m * (m - 1))
    if np.any(np.linalg.cond(A) > 1e12):
        raise DefinitenessError("A_ij is singular")
    return ATensor(A, np.linalg.inv(A))


def inverse41(M: MetricSpec, x, y) -> np.ndarray:
    """g^{ij} = F^{m-2}/(m-1) A^{ij} + (m-2)/(m-1) y^i y^j / F^2."""
    m = root_degree(M)
    y = np.asarray(y, dtype=float)
    At = a_tensor(M, x, y)
    F = eval_F(M, x, y).value[..., None, None]
    yy = y[..., :, None] * y[..., None, :]
    return F ** (m - 2) / (m - 1) * At.Ainv + (m - 2) / (m - 1) * yy / F**2


# rationality certification ----------------------------------------------------


@dataclass(frozen=True)
class RationalityCertificate:
    target: str
    numDegree: int
    denDegree: int
    fitResidual: float
    holdoutResidual: float
    verdict: str
    samples: int = 0
    mode: str = "exact"
    attempts: tuple = field(default_factory=tuple)


def _monomials(n, d):
    return np.array(list(_compositions(d, n)), dtype=np.int64)


def _mod_eval_monomials(ys, exps, p):
    """Matrix of monomial values y^e mod p: shape (samples, monomials)."""
    out = np.ones((len(ys), len(exps)), dtype=np.int64)
    for k in range(exps.shape[1]):
        col = ys[:, k]
        maxe = int(exps[:, k].max()) if len(exps) else 0
        powers = np.ones((maxe + 1, len(ys)), dtype=np.int64)
        for e in range(1, maxe + 1):
            powers[e] = powers[e - 1] * col % p
        out = out * powers[exps[:, k]].T % p
    return out


def _nullspace_mod(A, p):
    """Basis of the right nullspace of A over GF(p) (rows = basis vectors)."""
    A = A.copy() % p
    rows, cols = A.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.flatnonzero(A[r:, c])
        if len(nz) == 0:
            continue
        k = r + nz[0]
        if k != r:
            A[[r, k], c:] = A[[k, r], c:]
        A[r, c:] = A[r, c:] * pow(int(A[r, c]), p - 2, p) % p
        fac = A[:, c].copy()
        fac[r] = 0
        hit = np.flatnonzero(fac)
        if len(hit):
            A[hit, c:] = (A[hit, c:] - np.outer(fac[hit], A[r, c:])) % p
        pivots.append(c)
        r += 1
    pivset = set(pivots)
    free = [c for c in range(cols) if c not in pivset]
    basis = np.zeros((len(free), cols), dtype=np.int64)
    for t, fc in enumerate(free):
        basis[t, fc] = 1
        for i, pc in enumerate(pivots):
            basis[t, pc] = (-A[i, fc]) % p
    return basis


def _random_rational_directions(M, x, count, rng, max_tries=1000):
    """Cone directions with small rational coordinates, as Fractions and floats."""
    n = dimension(M)
    out = []
    tries = 0
    while len(out) < count:
        tries += 1
        if tries > max_tries * count:
            raise SamplingError(f"could not find {count} rational cone directions")
        num = rng.integers(-40, 41, size=(4 * count, n))
        den = rng.integers(1, 12, size=(4 * count, n))
        yf = num / den
        ok = in_cone(M, np.broadcast_to(np.asarray(x, dtype=float), yf.shape), yf) & np.any(num != 0, axis=1)
        for row_n, row_d in zip(num[ok], den[ok]):
            out.append([Fraction(int(a), int(b)) for a, b in zip(row_n, row_d)])
            if len(out) == count:
                break
    return out


def _target_values(M, x, ys, targets, field):
    F2ginv, ric, F2r = exact_invariants(M, [x] * len(ys), ys, field)
    out = {}
    for target in targets:
        if target == "Ric":
            out[target] = ric
        elif target == "F2r":
            out[target] = F2r
        elif target.startswith("F2ginv(") and target.endswith(")"):
            i, j = (int(t) for t in target[7:-1].split(","))
            out[target] = F2ginv[:, i - 1, j - 1]
        else:
            raise ValueError(f"unknown rationality target {target!r}")
    return out


TARGET_DEGREE = 2  # every target is 2-homogeneous in y


def _solve_fit(vals, Nm, Dm, fit, hold, rng, p):
    """Holdout failure count of a random nullspace fit, or None if there is no usable fit."""
    nN = Nm.shape[1]
    system = np.concatenate([Nm[fit], (-(vals[fit, None] * Dm[fit])) % p], axis=1)
    basis = _nullspace_mod(system, p)
    if len(basis) == 0:
        return None
    for _ in range(8):
        w = rng.integers(1, p, size=len(basis))
        coef = np.zeros(system.shape[1], dtype=np.int64)
        for wk, bk in zip(w, basis):
            coef = (coef + int(wk) * bk) % p
        cn, cd = coef[:nN], coef[nN:]
        if np.any(cd):
            break
    else:
        return None
    Nh = (Nm[hold] * cn % p).sum(axis=1) % p
    Dh = (Dm[hold] * cd % p).sum(axis=1) % p
    return int(np.count_nonzero((Nh - vals[hold] * Dh % p) % p)) + int(np.count_nonzero(Dh == 0))


def certify_targets(
    M: MetricSpec,
    targets,
    x=None,
    degree_bounds=None,
    sample_budget: int | None = None,
    seed: int = 0,
    holdout: int = 16,
    field: ModularField = MOD_P,
) -> list[RationalityCertificate]:
    """Fit N/D to each target at random rational directions and validate on a holdout set.

    All arithmetic is modulo a large prime, so a pass means the target agrees
    with a rational function of the given degrees at every holdout point
    (the chance of a false pass is negligible).  Bounds double while the fit
    system has no usable solution, up to a cap of 24.  One batch of curvature
    evaluations is shared by all targets at a given bound.
    """
    M = as_mroot(M)
    n, m = dimension(M), root_degree(M)
    x = [Fraction(v) for v in (x if x is not None else [0] * n)]
    num_deg, den_deg = degree_bounds or (3 * m, 3 * m)
    extra = 8 if sample_budget is None else max(0, sample_budget)
    rng = np.random.default_rng(seed)
    p = field.p
    pending = list(targets)
    done: dict = {}
    attempts = []
    while pending:
        d = min(den_deg, num_deg - TARGET_DEGREE)
        if d < 0:
            raise InconclusiveFitError("numerator degree bound is below the targets' homogeneity degree")
        Nexp, Dexp = _monomials(n, d + TARGET_DEGREE), _monomials(n, d)
        nfit = len(Nexp) + len(Dexp) + extra
        ys = _random_rational_directions(M, x, nfit + holdout, rng)
        values = _target_values(M, x, ys, pending, field)
        ym = field.coerce(np.array(ys, dtype=object))
        Nm, Dm = _mod_eval_monomials(ym, Nexp, p), _mod_eval_monomials(ym, Dexp, p)
        fit, hold = slice(0, nfit), slice(nfit, None)
        attempts.append((num_deg, den_deg))
        for t in list(pending):
            bad = _solve_fit(values[t], Nm, Dm, fit, hold, rng, p)
            if bad is None:
                continue
            done[t] = RationalityCertificate(
                target=t,
                numDegree=num_deg,
                denDegree=den_deg,
                fitResidual=0.0,
                holdoutResidual=float(bad),
                verdict="pass" if bad == 0 else "fail",
                samples=len(ys),
                attempts=tuple(attempts),
            )
            pending.remove(t)
        if pending:
            if max(num_deg, den_deg) >= DEGREE_CAP:
                raise InconclusiveFitError(
                    f"no rational fit for {', '.join(pending)} within degree bounds ({num_deg}, {den_deg})"
                )
            num_deg, den_deg = min(2 * num_deg, DEGREE_CAP), min(2 * den_deg, DEGREE_CAP)
    return [done[t] for t in targets]


def certify_rational(M: MetricSpec, target: str, x=None, degree_bounds=None, sample_budget=None, seed: int = 0, **kw):
    """Certificate for a single target; see :func:`certify_targets`."""
    return certify_targets(M, [target], x, degree_bounds, sample_budget, seed, **kw)[0]


def certify_rational_float(values, ys, num_deg: int, den_deg: int, homogeneity: int = TARGET_DEGREE, holdout: int = 16):
    """Floating-point variant: SVD nullspace fit, relative holdout residual."""
    ys = np.asarray(ys, dtype=float)
    values = np.asarray(values, dtype=float)
    n = ys.shape[1]
    d = min(den_deg, num_deg - homogeneity)
    Nexp, Dexp = _monomials(n, d + homogeneity), _monomials(n, d)
    Nm = np.prod(ys[:, None, :] ** Nexp[None], axis=2)
    Dm = np.prod(ys[:, None, :] ** Dexp[None], axis=2)
    fit = slice(0, len(ys) - holdout)
    hold = slice(len(ys) - holdout, None)
    system = np.concatenate([Nm[fit], -values[fit, None] * Dm[fit]], axis=1)
    _, sv, vt = np.linalg.svd(system)
    coef = vt[-1]
    fit_res = float(sv[-1] / sv[0]) if sv[0] > 0 else 0.0
    cn, cd = coef[: len(Nexp)], coef[len(Nexp) :]
    pred = (Nm[hold] @ cn) / (Dm[hold] @ cd)
    scale = max(1.0, float(np.max(np.abs(values[hold]))))
    hres = float(np.max(np.abs(pred - values[hold]))) / scale
    return RationalityCertificate(
        target="values",
        numDegree=num_deg,
        denDegree=den_deg,
        fitResidual=fit_res,
        holdoutResidual=hres,
        verdict="pass" if hres < 1e-8 else "fail",
        samples=len(ys),
        mode="float",
    )


def rationality_targets(n: int) -> list[str]:
    return [f"F2ginv({i},{j})" for i in range(1, n + 1) for j in range(i, n + 1)] + ["Ric", "F2r"]


# the weak-isotropy dichotomy ---------------------------------------------------


@dataclass(frozen=True)
class IsotropyVerdict:
    verdict: str  # consistent-a | consistent-b | violation | outside-scope
    max_abs_r: float
    fit_residual: float
    theta: tuple
    isoMu: float

    @property
    def consistent(self) -> bool:
        return self.verdict.startswith("consistent") or self.verdict == "outside-scope"


def theorem1_check(M: MetricSpec, x, directions, tol: float = 1e-6) -> IsotropyVerdict:
    """Either r vanishes on every direction, or r is not of weakly isotropic form.

    For m = 2 the metric is Riemannian, F^2 is itself rational and a nonzero
    constant r is weakly isotropic; such metrics fall outside the statement
    and are reported as ``outside-scope``.
    """
    n = dimension(M)
    ys = np.asarray(directions, dtype=float)
    xs = np.broadcast_to(np.asarray(x, dtype=float), ys.shape)
    r = curvature_bundle(M, xs, ys).scalarR
    F = eval_F(M, xs, ys).value
    fit = fit_weakly_isotropic(ys, r, F, n)
    max_r = float(np.max(np.abs(r)))
    scale = max(1.0, max_r)
    rel_res = fit.residual / scale
    if root_degree(M) == 2:
        verdict = "outside-scope"
    elif max_r < tol:
        verdict = "consistent-a"
    elif rel_res > tol:
        verdict = "consistent-b"
    else:
        verdict = "violation"
    return IsotropyVerdict(verdict, max_r, rel_res, tuple(float(t) for t in fit.theta), fit.isoMu)


def cone_directions(M: MetricSpec, x, count: int, rng) -> np.ndarray:
    return sample_cone(M, np.asarray(x, dtype=float), count, rng)
