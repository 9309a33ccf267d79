"""Exact checks of the algebra forcing a conformally flat cubic metric with
vanishing scalar curvature to be homothetic.

Everything starts from the quadratic identity in y

    B(4p+3qB) k0^2 - 4(4p+3qB) bt k0 f + 4p at2 f^2 = h [p B at2 - (4p+3qB) bt^2]

where ``at2 = a~_ij y^i y^j``, ``bt = b~_i y^i``, ``k0 = k_i y^i``,
``B = a~^{ij} b~_i b~_j`` and ``f = a~^{ij} b~_i k_j``.  Contracting its
y-Hessian and y-gradient with ``b~^i`` pins down ``h`` and then
``f (f bt - B k0) = 0``; the case split on ``f`` finishes the argument.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

from .errors import ConfigError, DegenerateGammaError, ParameterError
from .poly import Poly, PolyRing, gradient_contraction, hessian_contraction, linear_form, quadratic_form


def _frac(v) -> Fraction:
    if isinstance(v, str):
        return Fraction(v.strip())
    return Fraction(v)


def _rational_inverse(a):
    """Exact inverse of a rational matrix by Gauss-Jordan (pivoting on nonzeros)."""
    n = len(a)
    m = [[Fraction(v) for v in row] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(a)]
    for c in range(n):
        piv = next((r for r in range(c, n) if m[r][c] != 0), None)
        if piv is None:
            raise ParameterError("a~ is singular")
        m[c], m[piv] = m[piv], m[c]
        inv = 1 / m[c][c]
        m[c] = [v * inv for v in m[c]]
        for r in range(n):
            if r != c and m[r][c] != 0:
                fac = m[r][c]
                m[r] = [v - fac * w for v, w in zip(m[r], m[c])]
    return [row[n:] for row in m]


def _exact_positive_definite(a) -> bool:
    """Leading pivots of unpivoted elimination are all positive."""
    n = len(a)
    m = [[Fraction(v) for v in row] for row in a]
    for k in range(n):
        if m[k][k] <= 0:
            return False
        for r in range(k + 1, n):
            fac = m[r][k] / m[k][k]
            m[r] = [v - fac * w for v, w in zip(m[r], m[k])]
    return True


@dataclass(frozen=True)
class ProofInstance:
    n: int
    atilde: tuple
    btilde: tuple
    kgrad: tuple
    p: Fraction
    q: Fraction

    def __post_init__(self):
        n = self.n
        if len(self.atilde) != n or any(len(r) != n for r in self.atilde):
            raise ParameterError(f"atilde must be {n}x{n}")
        if len(self.btilde) != n or len(self.kgrad) != n:
            raise ParameterError(f"btilde and kgrad need {n} entries")
        if any(self.atilde[i][j] != self.atilde[j][i] for i in range(n) for j in range(n)):
            raise ParameterError("atilde must be symmetric")
        if not _exact_positive_definite(self.atilde):
            raise ParameterError("atilde must be positive definite")
        if self.p + self.q * self.B == 0:
            raise ParameterError("p + qB must be nonzero")
        if self.c4 == 0:
            raise ParameterError("4p + 3qB must be nonzero")

    @property
    def ainv(self):
        return _rational_inverse(self.atilde)

    @property
    def b_up(self):
        ai = self.ainv
        return [sum(ai[i][j] * self.btilde[j] for j in range(self.n)) for i in range(self.n)]

    @property
    def B(self) -> Fraction:
        return sum((u * b for u, b in zip(self.b_up, self.btilde)), Fraction(0))

    @property
    def f(self) -> Fraction:
        return sum((u * k for u, k in zip(self.b_up, self.kgrad)), Fraction(0))

    @property
    def c4(self) -> Fraction:
        return 4 * self.p + 3 * self.q * self.B

    def with_kgrad(self, kgrad) -> "ProofInstance":
        return ProofInstance(self.n, self.atilde, self.btilde, tuple(_frac(v) for v in kgrad), self.p, self.q)


def make_instance(atilde, btilde, kgrad, p, q) -> ProofInstance:
    a = tuple(tuple(_frac(v) for v in row) for row in atilde)
    return ProofInstance(
        len(a), a, tuple(_frac(v) for v in btilde), tuple(_frac(v) for v in kgrad), _frac(p), _frac(q)
    )


def instance_from_dict(d: dict) -> ProofInstance:
    try:
        inst = make_instance(d["atilde"], d["btilde"], d["kgrad"], d["p"], d["q"])
    except KeyError as err:
        raise ConfigError(f"proof instance needs key {err.args[0]!r}") from None
    except (ValueError, ZeroDivisionError) as err:
        raise ConfigError(f"bad proof instance: {err}") from None
    if "n" in d and int(d["n"]) != inst.n:
        raise ConfigError(f"declared n={d['n']} but atilde is {inst.n}x{inst.n}")
    return inst


def _frac_text(v: Fraction) -> str:
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def instance_to_dict(inst: ProofInstance) -> dict:
    return {
        "n": inst.n,
        "atilde": [[_frac_text(v) for v in row] for row in inst.atilde],
        "btilde": [_frac_text(v) for v in inst.btilde],
        "kgrad": [_frac_text(v) for v in inst.kgrad],
        "p": _frac_text(inst.p),
        "q": _frac_text(inst.q),
    }


def load_instance(path) -> ProofInstance:
    with open(path) as fh:
        return instance_from_dict(json.load(fh))


# the quadratic identity ------------------------------------------------------------


def y_names(n):
    return [f"y{i + 1}" for i in range(n)]


def instance_ring(n: int) -> PolyRing:
    return PolyRing(y_names(n) + ["h"])


@dataclass(frozen=True)
class _Forms:
    at2: Poly
    bt: Poly
    k0: Poly


def _forms(inst: ProofInstance, ring: PolyRing) -> _Forms:
    names = y_names(inst.n)
    return _Forms(
        quadratic_form(ring, inst.atilde, names),
        linear_form(ring, inst.btilde, names),
        linear_form(ring, inst.kgrad, names),
    )


def gamma(inst: ProofInstance, ring: PolyRing | None = None) -> Poly:
    """p B at2 - (4p+3qB) bt^2."""
    ring = ring or instance_ring(inst.n)
    fm = _forms(inst, ring)
    return fm.at2 * (inst.p * inst.B) - fm.bt * fm.bt * inst.c4


def _b2(B, f, p, c4, at2, bt, k0, h):
    lhs = k0 * k0 * (B * c4) - bt * k0 * f * c4 * 4 + at2 * f * f * p * 4
    return lhs - h * (at2 * p * B - bt * bt * c4)


def build_b2(inst: ProofInstance, h=None) -> Poly:
    """LHS - RHS of the quadratic identity; symbolic in h when h is None."""
    ring = instance_ring(inst.n)
    fm = _forms(inst, ring)
    hv = ring.var("h") if h is None else ring.const(h)
    return _b2(inst.B, inst.f, inst.p, inst.c4, fm.at2, fm.bt, fm.k0, hv)


def solve_for_h(inst: ProofInstance) -> Fraction | None:
    """The rational h making the identity hold for every y, if any."""
    g = gamma(inst)
    if g.is_zero():
        raise DegenerateGammaError("gamma vanishes identically (pB = 0 and 4p + 3qB = 0)")
    lhs = build_b2(inst, 0)
    mono, gc = next(iter(g.sorted_terms()))
    h = lhs.terms.get(mono, Fraction(0)) / gc
    return h if (lhs - g * h).is_zero() else None


def h_from_contraction(inst: ProofInstance) -> Fraction:
    """h = f^2 (8p + 9qB) / (3B(p + qB)), forced by the Hessian contraction."""
    den = 3 * inst.B * (inst.p + inst.q * inst.B)
    if den == 0:
        raise ParameterError("3B(p + qB) vanishes; h is not determined")
    return inst.f**2 * (8 * inst.p + 9 * inst.q * inst.B) / den


# symbolic verification ----------------------------------------------------------------


@dataclass(frozen=True)
class StepResult:
    name: str
    passed: bool
    residue: str
    detail: str = ""


def _symbolic_setup(n: int):
    """Ring with a~ = I and b~, k, p, q, h free; B and f become polynomials."""
    ys = y_names(n)
    bs = [f"b{i + 1}" for i in range(n)]
    ks = [f"k{i + 1}" for i in range(n)]
    ring = PolyRing(ys + bs + ks + ["p", "q", "h"])
    Y, Bv, K = ring.gens(*ys), ring.gens(*bs), ring.gens(*ks)
    p, q, h = ring.gens("p", "q", "h")
    B = sum((b * b for b in Bv), ring.zero())
    f = sum((b * k for b, k in zip(Bv, K)), ring.zero())
    at2 = sum((y * y for y in Y), ring.zero())
    bt = sum((b * y for b, y in zip(Bv, Y)), ring.zero())
    k0 = sum((k * y for k, y in zip(K, Y)), ring.zero())
    c4 = p * 4 + q * B * 3
    E = _b2(B, f, p, c4, at2, bt, k0, h)
    return ring, ys, Bv, B, f, p, q, h, c4, E, bt, k0


def hessian_identity_residue(n: int = 3) -> Poly:
    """b~^i b~^j E_{y^i y^j} - [2Bf^2(4p - 3(4p+3qB)) + 6B^2 h(p+qB)], symbolically."""
    ring, ys, Bv, B, f, p, q, h, c4, E, _, _ = _symbolic_setup(n)
    contracted = hessian_contraction(E, ys, Bv, Bv)
    expected = B * f * f * (p * 4 - c4 * 3) * 2 + B * B * h * (p + q * B) * 6
    return contracted - expected


def verify_step410(n: int = 3, instances=()) -> StepResult:
    """The b~b~-contracted Hessian equals 2Bf^2(4p-3(4p+3qB)) + 6B^2h(p+qB).

    Checked as a polynomial identity with a~ = I and all other data symbolic,
    then on each given instance (arbitrary a~, h symbolic).  Setting the
    contraction to zero is exactly B f^2 (8p+9qB) = 3 B^2 h (p+qB).
    """
    res = hessian_identity_residue(n)
    bad = [] if res.is_zero() else ["symbolic"]
    for inst in instances:
        E = build_b2(inst)
        ring = E.ring
        bu = [ring.const(v) for v in inst.b_up]
        got = hessian_contraction(E, y_names(inst.n), bu, bu)
        h = ring.var("h")
        B, f, p, q = inst.B, inst.f, inst.p, inst.q
        want = ring.const(2 * B * f * f * (4 * p - 3 * inst.c4)) + h * (6 * B * B * (p + q * B))
        if not (got - want).is_zero():
            bad.append("instance")
    return StepResult("hessian-contraction", not bad, str(res), "failed: " + ", ".join(bad) if bad else "")


def gradient_identity_residue(n: int = 3) -> Poly:
    """3B(p+qB) * [1/2 b~^i E_{y^i}] with h eliminated, minus 3B(p+qB)(4p+3qB) f (f bt - B k0)."""
    ring, ys, Bv, B, f, p, q, h, c4, E, bt, k0 = _symbolic_setup(n)
    half_grad = gradient_contraction(E, ys, Bv) / 2
    den = B * (p + q * B) * 3
    at_h0 = half_grad.subs({"h": 0})
    h_coef = half_grad.coefficient({"h": 1})
    cleared = at_h0 * den + h_coef * f * f * (p * 8 + q * B * 9)
    return cleared - den * c4 * f * (f * bt - B * k0)


def gradient_step_residue(inst: ProofInstance) -> Poly:
    """1/2 b~^i E_{y^i} at h from the Hessian step, minus (4p+3qB) f (f bt - B k0)."""
    h = h_from_contraction(inst)
    E = build_b2(inst, h)
    ring = E.ring
    fm = _forms(inst, ring)
    got = gradient_contraction(E, y_names(inst.n), [ring.const(v) for v in inst.b_up]) / 2
    return got - (fm.bt * inst.f - fm.k0 * inst.B) * (inst.c4 * inst.f)


def verify_step412(n: int = 3, instances=()) -> StepResult:
    res = gradient_identity_residue(n)
    bad = [] if res.is_zero() else ["symbolic"]
    for inst in instances:
        try:
            if not gradient_step_residue(inst).is_zero():
                bad.append("instance")
        except ParameterError:
            continue
    return StepResult("gradient-contraction", not bad, str(res), "failed: " + ", ".join(bad) if bad else "")


def positivity_identity_residue() -> Poly:
    """(9/2) phi^5 T - p[(4p+3qB)s^2 - pB] with phi^3 = ps + qs^3.

    T = phi - s phi' + (B - s^2) phi''; writing u = phi^3 gives
    phi^5 T = u^2 - s u u'/3 + (B - s^2)(u u''/3 - 2u'^2/9).
    """
    ring = PolyRing(["p", "q", "B", "s"])
    p, q, B, s = ring.gens("p", "q", "B", "s")
    u = p * s + q * s * s * s
    du = u.diff("s")
    ddu = du.diff("s")
    phi5T = u * u - s * u * du / 3 + (B - s * s) * (u * ddu / 3 - du * du * Fraction(2, 9))
    return phi5T * Fraction(9, 2) - p * ((p * 4 + q * B * 3) * s * s - p * B)


def verify_cubic_positivity_identity() -> StepResult:
    res = positivity_identity_residue()
    return StepResult("positivity-identity", res.is_zero(), str(res))


# case analysis -----------------------------------------------------------------------


@dataclass(frozen=True)
class CaseVerdict:
    verdict: str  # CaseI-homothety | CaseII-infeasible | hypothesis-fails | inconsistent
    h: Fraction | None
    f: Fraction
    routes: tuple = ()
    detail: str = ""


def case_analysis(inst: ProofInstance) -> CaseVerdict:
    """Follow the f = 0 / f != 0 split for one instance.

    In Case II, f bt = B k0 collapses the identity to c (B at2 - bt^2) = 0
    with c = p f^2 (4p+3qB) / (3B(p+qB)).  The form B at2 - bt^2 is positive
    semidefinite and nonzero when n >= 2, so c = 0 and therefore p = 0.  But
    then the positivity bracket p[(4p+3qB)s^2 - pB] vanishes identically and
    F is not a Finsler metric.
    """
    f = inst.f
    h = solve_for_h(inst)
    if h is None:
        return CaseVerdict("hypothesis-fails", None, f, detail="no h makes the quadratic identity hold")
    if f == 0:
        kappa_zero = all(k == 0 for k in inst.kgrad)
        if h == 0 and kappa_zero:
            return CaseVerdict("CaseI-homothety", h, f, ("h=0", "k=0"), "f = 0 forces h = 0 and grad kappa = 0")
        return CaseVerdict("inconsistent", h, f, detail=f"f = 0 but h = {h}, kappa zero: {kappa_zero}")
    if h != h_from_contraction(inst):
        return CaseVerdict("inconsistent", h, f, detail="h disagrees with the Hessian contraction")
    if not gradient_step_residue(inst).is_zero():
        return CaseVerdict("inconsistent", h, f, detail="gradient contraction identity fails")
    ring = instance_ring(inst.n)
    fm = _forms(inst, ring)
    if not (fm.bt * f - fm.k0 * inst.B).is_zero():
        return CaseVerdict("inconsistent", h, f, detail="f bt - B k0 does not vanish although f != 0")
    # with k = (f/B) b~ the identity must read c (B at2 - bt^2) = 0
    collapsed = build_b2(inst.with_kgrad([v * f / inst.B for v in inst.btilde]), h)
    form = fm.at2 * inst.B - fm.bt * fm.bt
    c = inst.p * f * f * inst.c4 / (3 * inst.B * (inst.p + inst.q * inst.B))
    if not (collapsed - form * c).is_zero() or form.is_zero():
        return CaseVerdict("inconsistent", h, f, detail="collapsed identity is not c (B at2 - bt^2)")
    if c != 0:
        return CaseVerdict("inconsistent", h, f, detail="identity holds with c != 0 against a nonzero form")
    return CaseVerdict(
        "CaseII-infeasible",
        h,
        f,
        ("definiteness", "positivity"),
        "B at2 - bt^2 is nonzero and semidefinite, so c = 0 and hence p = 0; "
        "p = 0 makes the positivity bracket vanish identically",
    )
