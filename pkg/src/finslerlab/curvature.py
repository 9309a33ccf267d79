"""Spray coefficients and curvature of a Finsler metric.

The definitional pipeline works entirely with jets of F^2 in the 2n
variables (x, y): the spray G^i is assembled as a jet, its x/y-derivatives
feed the Riemann curvature, the Ricci scalar is kept as a jet so that its
y-Hessian gives the Ricci tensor, and the scalar curvature is
``r = g^{ij} Ric_ij``.

Jet orders: G at a point needs F^2 to order 2; R^i_k needs order 4; the
Ricci tensor needs order 6.  Only two x-derivatives of F^2 are ever used, so
the x block is capped accordingly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import AuxSingularityError, DegenerateSampleError, FormulaSingularityError
from .exprlang import eval_jet, fold_constant
from .fields import FLOAT, Field
from .jets import Jet, jet_space, matinv
from .metrics import (
    CubicSpec,
    MetricSpec,
    OneFormSpec,
    RiemannSpec,
    dimension,
    f2_jet,
    phi_derivatives,
)

HALF = Fraction(1, 2)
QUARTER = Fraction(1, 4)


@dataclass(frozen=True)
class CurvatureBundle:
    G: np.ndarray  # (*batch, n)
    R: np.ndarray  # (*batch, n, n), R[..., i, k] = R^i_k
    Ric: np.ndarray  # (*batch,)
    RicTensor: np.ndarray  # (*batch, n, n)
    scalarR: np.ndarray  # (*batch,)


def _unit(n2, *idx):
    alpha = [0] * n2
    for i in idx:
        alpha[i] += 1
    return tuple(alpha)


class _Spray:
    """Spray jets G^i built from a jet of F^2 of the given order."""

    def __init__(self, M: MetricSpec, x, y, order: int, field: Field = FLOAT):
        n = dimension(M)
        self.n = n
        self.field = field
        xcap = min(2, order - 1)
        self.F2, self.scale = f2_jet(M, x, y, order, field=field, xcap=xcap)
        F2 = self.F2
        dy = [F2.diff(n + j) for j in range(n)]
        g = [[dy[i].diff(n + j) * HALF for j in range(n)] for i in range(n)]
        self.ginv = matinv(g)
        yv = F2.space  # y coordinate jets live in the same space
        self.Y = [Jet.variable(yv, n + k, field.coerce(self._y(y, k)), field) for k in range(n)]
        w = []
        for j in range(n):
            acc = -F2.diff(j)
            for k in range(n):
                acc = acc + F2.diff(k).diff(n + j) * self.Y[k]
            w.append(acc)
        self.G = []
        for i in range(n):
            acc = self.ginv[i][0] * w[0]
            for j in range(1, n):
                acc = acc + self.ginv[i][j] * w[j]
            self.G.append(acc * QUARTER)

    def _y(self, y, k):
        dtype = float if self.field is FLOAT else object
        y = np.asarray(y, dtype=dtype)
        return np.broadcast_to(y, self.F2.batch_shape + (self.n,))[..., k]

    def values(self):
        return np.stack([g.value for g in self.G], axis=-1)

    def riemann_at_point(self):
        """R^i_k at the expansion point from partials of the G jets."""
        n, n2 = self.n, 2 * self.n
        G = self.G
        Gv = np.stack([g.value for g in G], axis=-1)
        dGx = np.empty(Gv.shape + (n,), dtype=Gv.dtype)
        dGy = np.empty_like(dGx)
        dGxy = np.empty(Gv.shape + (n, n), dtype=Gv.dtype)
        dGyy = np.empty_like(dGxy)
        for i in range(n):
            for j in range(n):
                dGx[..., i, j] = G[i].partial(_unit(n2, j))
                dGy[..., i, j] = G[i].partial(_unit(n2, n + j))
                for k in range(n):
                    dGxy[..., i, j, k] = G[i].partial(_unit(n2, j, n + k))
                    dGyy[..., i, j, k] = G[i].partial(_unit(n2, n + j, n + k))
        y = np.stack([self.Y[k].value for k in range(n)], axis=-1)
        R = (
            2 * dGx
            - np.einsum("...ijk,...j->...ik", dGxy, y)
            + 2 * np.einsum("...j,...ijk->...ik", Gv, dGyy)
            - np.einsum("...ij,...jk->...ik", dGy, dGy)
        )
        return R

    def ricci_jet(self) -> Jet:
        """Ric = R^k_k as a jet (two orders below G)."""
        n = self.n
        G, Y = self.G, self.Y
        acc = None
        for i in range(n):
            t = G[i].diff(i) * 2
            for j in range(n):
                t = t - Y[j] * G[i].diff(j).diff(n + i)
                t = t + G[j] * G[i].diff(n + j).diff(n + i) * 2
                t = t - G[i].diff(n + j) * G[j].diff(n + i)
            acc = t if acc is None else acc + t
        return acc


def spray_from_definition(M: MetricSpec, x, y) -> np.ndarray:
    """G^i = 1/4 g^{ij} (F^2_{x^k y^j} y^k - F^2_{x^j}), shape (*batch, n)."""
    return _Spray(M, x, y, 2).values()


def spray_jets(M: MetricSpec, x, y, order: int, field: Field = FLOAT) -> list[Jet]:
    """Jets of G^i to the requested order in (x, y)."""
    return _Spray(M, x, y, order + 2, field).G


def riemann_curvature(M: MetricSpec, x, y) -> np.ndarray:
    """R^i_k, returned as array [..., i, k]."""
    return _Spray(M, x, y, 4).riemann_at_point()


def ricci(M: MetricSpec, x, y) -> np.ndarray:
    return np.trace(riemann_curvature(M, x, y), axis1=-2, axis2=-1)


def _ricci_tensor_from(sp: _Spray, ric: Jet):
    n, n2 = sp.n, 2 * sp.n
    field = sp.field
    out = np.empty(ric.batch_shape + (n, n), dtype=ric.c.dtype)
    for i in range(n):
        for j in range(i, n):
            v = field.norm(ric.partial(_unit(n2, n + i, n + j)) * field.coerce(HALF))
            out[..., i, j] = out[..., j, i] = v
    return out


def ricci_tensor(M: MetricSpec, x, y) -> np.ndarray:
    """Ric_ij = 1/2 Ric_{y^i y^j}."""
    sp = _Spray(M, x, y, 6)
    return _ricci_tensor_from(sp, sp.ricci_jet())


def curvature_bundle(M: MetricSpec, x, y) -> CurvatureBundle:
    sp = _Spray(M, x, y, 6)
    ric = sp.ricci_jet()
    RicT = _ricci_tensor_from(sp, ric)
    ginv0 = np.stack([np.stack([e.value for e in row], axis=-1) for row in sp.ginv], axis=-2)
    r = np.einsum("...ij,...ij->...", ginv0, RicT) / sp.scale
    return CurvatureBundle(sp.values(), sp.riemann_at_point(), ric.value, RicT, r)


def scalar_curvature(M: MetricSpec, x, y) -> np.ndarray:
    """r = g^{ij} Ric_ij."""
    return curvature_bundle(M, x, y).scalarR


def exact_invariants(M: MetricSpec, x, y, field: Field):
    """Scale-free quantities in an exact field: (F^2 g^{ij}, Ric, F^2 r).

    All three are invariant under F -> cF, so they are computed from the
    normalized F^2 jet whose coefficients stay in the field.
    """
    sp = _Spray(M, x, y, 6, field)
    ric = sp.ricci_jet()
    RicT = _ricci_tensor_from(sp, ric)
    n = sp.n
    f2v = sp.F2.value
    ginv = np.empty(ric.batch_shape + (n, n), dtype=ric.c.dtype)
    for i in range(n):
        for j in range(n):
            ginv[..., i, j] = sp.ginv[i][j].value
    F2ginv = field.norm(ginv * f2v[..., None, None])
    contr = field.zeros(ric.batch_shape)
    for i in range(n):
        for j in range(n):
            contr = field.norm(contr + field.norm(ginv[..., i, j] * RicT[..., i, j]))
    return F2ginv, ric.value, field.norm(contr * f2v)


def f2_ginv_exact(M: MetricSpec, x, y, field: Field):
    """F^2 g^{ij} alone; needs only second-order jets in y."""
    n = dimension(M)
    F2, _ = f2_jet(M, x, y, 2, field=field, xcap=0)
    g = [[F2.diff(n + i).diff(n + j) * HALF for j in range(n)] for i in range(n)]
    const = np.array([[g[i][j].value for j in range(n)] for i in range(n)], dtype=field.dtype)
    inv = field.matinv(const)
    out = np.moveaxis(inv, (0, 1), (-2, -1))
    return field.norm(out * F2.value[..., None, None])


# Riemannian building blocks ------------------------------------------------


def _grad_values(e, x, n):
    """Value and gradient of an expression at x (float), shapes (*b,) and (*b, n)."""
    v = fold_constant(e)
    if v is not None:
        return np.full(x.shape[:-1], float(v)), np.zeros(x.shape)
    j = eval_jet(e, x, space=jet_space(n, 1))
    grad = np.stack([j.partial(tuple(int(k == i) for k in range(n))) for i in range(n)], axis=-1)
    return j.value, grad


def metric_and_derivatives(alpha: RiemannSpec, x):
    """a_ij and d_k a_ij at x: shapes (*b, n, n) and (*b, n, n, n) with k last."""
    x = np.asarray(x, dtype=float)
    n = alpha.n
    a = np.empty(x.shape[:-1] + (n, n))
    da = np.empty(x.shape[:-1] + (n, n, n))
    for i in range(n):
        for j in range(i, n):
            v, g = _grad_values(alpha.a[i][j], x, n)
            a[..., i, j] = a[..., j, i] = v
            da[..., i, j, :] = da[..., j, i, :] = g
    return a, da


def christoffel(alpha: RiemannSpec, x) -> np.ndarray:
    """Levi-Civita symbols Gamma[..., l, i, j] = Gamma^l_ij of alpha."""
    a, da = metric_and_derivatives(alpha, x)
    ainv = np.linalg.inv(a)
    # lower: Gamma_kij = 1/2 (d_i a_kj + d_j a_ki - d_k a_ij)
    low = 0.5 * (
        np.einsum("...kji->...kij", da) + np.einsum("...kij->...kij", da) - np.einsum("...ijk->...kij", da)
    )
    return np.einsum("...lk,...kij->...lij", ainv, low)


def one_form_and_derivatives(beta: OneFormSpec, x):
    x = np.asarray(x, dtype=float)
    n = len(beta.b)
    b = np.empty(x.shape[:-1] + (n,))
    db = np.empty(x.shape[:-1] + (n, n))
    for i, e in enumerate(beta.b):
        b[..., i], db[..., i, :] = _grad_values(e, x, n)
    return b, db


@dataclass(frozen=True)
class CovDerivBundle:
    b_cov: np.ndarray  # b_{i|j}, [..., i, j]
    r_ij: np.ndarray
    s_ij: np.ndarray
    r_up: np.ndarray  # r^i_j
    s_up: np.ndarray  # s^i_j
    r_i: np.ndarray
    s_i: np.ndarray
    r: np.ndarray
    r00: np.ndarray
    s0: np.ndarray
    s_up0: np.ndarray  # s^i_0
    b_up: np.ndarray  # b^i


def cov_deriv_bundle(alpha: RiemannSpec, beta: OneFormSpec, x, y) -> CovDerivBundle:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    a, _ = metric_and_derivatives(alpha, x)
    ainv = np.linalg.inv(a)
    gam = christoffel(alpha, x)
    b, db = one_form_and_derivatives(beta, x)
    bij = db - np.einsum("...lij,...l->...ij", gam, b)
    r_ij = 0.5 * (bij + np.swapaxes(bij, -1, -2))
    s_ij = 0.5 * (bij - np.swapaxes(bij, -1, -2))
    b_up = np.einsum("...ij,...j->...i", ainv, b)
    r_up = np.einsum("...il,...lj->...ij", ainv, r_ij)
    s_up = np.einsum("...il,...lj->...ij", ainv, s_ij)
    r_j = np.einsum("...i,...ij->...j", b_up, r_ij)
    s_j = np.einsum("...i,...ij->...j", b_up, s_ij)
    return CovDerivBundle(
        b_cov=bij,
        r_ij=r_ij,
        s_ij=s_ij,
        r_up=r_up,
        s_up=s_up,
        r_i=r_j,
        s_i=s_j,
        r=np.einsum("...i,...i->...", b_up, r_j),
        r00=np.einsum("...ij,...i,...j->...", r_ij, y, y),
        s0=np.einsum("...i,...i->...", s_j, y),
        s_up0=np.einsum("...ij,...j->...i", s_up, y),
        b_up=b_up,
    )


def riemannian_spray(alpha: RiemannSpec, x, y) -> np.ndarray:
    """G_alpha^i = 1/2 Gamma^i_jk y^j y^k."""
    y = np.asarray(y, dtype=float)
    return 0.5 * np.einsum("...ijk,...j,...k->...i", christoffel(alpha, x), y, y)


@dataclass(frozen=True)
class ProfileCoefficients:
    Q: np.ndarray
    Theta: np.ndarray
    Psi: np.ndarray


def profile_coefficients(phi, dphi, ddphi, s, B) -> ProfileCoefficients:
    """Q, Theta, Psi of an (alpha, beta)-metric profile at s."""
    d1 = phi - s * dphi
    d2 = d1 + (B - s * s) * ddphi
    if np.any(d1 == 0):
        raise FormulaSingularityError("Q is singular: phi - s phi' = 0")
    if np.any(d2 == 0):
        raise FormulaSingularityError("Theta and Psi are singular: (phi - s phi') + (B - s^2) phi'' = 0")
    Q = dphi / d1
    Theta = (phi * dphi - s * (phi * ddphi + dphi * dphi)) / (2 * phi * d2)
    Psi = ddphi / (2 * d2)
    return ProfileCoefficients(Q, Theta, Psi)


def spray_alpha_beta(C: CubicSpec, x, y) -> np.ndarray:
    """G^i = G_alpha^i + alpha Q s^i_0 + (-2 Q alpha s_0 + r_00)(Psi b^i + Theta y^i / alpha)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    a, _ = metric_and_derivatives(C.alpha, x)
    b, _ = one_form_and_derivatives(C.beta, x)
    bundle = cov_deriv_bundle(C.alpha, C.beta, x, y)
    alpha = np.sqrt(np.einsum("...ij,...i,...j->...", a, y, y))
    s = np.einsum("...i,...i->...", b, y) / alpha
    B = np.einsum("...i,...i->...", bundle.b_up, b)
    phi, dphi, ddphi = phi_derivatives(C.p, C.q, s)
    pc = profile_coefficients(phi, dphi, ddphi, s, B)
    G_a = riemannian_spray(C.alpha, x, y)
    lead = (-2 * pc.Q * alpha * bundle.s0 + bundle.r00)[..., None]
    return (
        G_a
        + (alpha * pc.Q)[..., None] * bundle.s_up0
        + lead * (pc.Psi[..., None] * bundle.b_up + (pc.Theta / alpha)[..., None] * y)
    )


# auxiliary scalars of the (alpha, beta) scalar-curvature formula -------------


@dataclass(frozen=True)
class AuxBundle:
    rho: object
    rho0: object
    rho1: object
    rho2: object
    delta: object
    epsilon: object
    auxMu: object
    tau: object
    lam: object
    eta: object
    Y: object
    A: object


def aux_from_profile(phi, dphi, ddphi, s, B, a, b, y, sqrt=None) -> AuxBundle:
    """Auxiliary quantities from profile values; works for floats or exact numbers.

    ``a`` is the matrix a_ij, ``b`` the covector b_i and ``y`` the working
    direction, which stands in for the otherwise undefined Y^i.
    """
    sqrt = sqrt or (lambda v: v**0.5)
    rho = phi * (phi - s * dphi)
    rho0 = phi * ddphi + dphi * dphi
    rho1 = -s * rho0 + phi * dphi
    rho2 = s * (s * rho0 - phi * dphi)
    if rho == 0:
        raise AuxSingularityError("rho = phi (phi - s phi') vanishes")
    if rho2 == 0:
        raise AuxSingularityError("epsilon = rho1 / rho2 is undefined because rho2 = 0")
    eps = rho1 / rho2
    delta = (rho0 - eps * eps * rho2) / rho
    mu = rho2 / rho
    if 1 + delta * B == 0:
        raise AuxSingularityError("1 + delta B vanishes (tau, lambda undefined)")
    tau = delta / (1 + delta * B)
    lam = (eps - delta * s) / (1 + delta * B)
    n = len(b)
    A = [[a[i][j] + delta * b[i] * b[j] for j in range(n)] for i in range(n)]
    Y2 = sum(A[i][j] * y[i] * y[j] for i in range(n) for j in range(n))
    if Y2 < 0:
        raise AuxSingularityError("A_ij y^i y^j is negative, Y is not real")
    Yv = sqrt(Y2)
    if 1 + Y2 * mu == 0:
        raise AuxSingularityError("1 + Y^2 mu vanishes (eta undefined)")
    eta = mu / (1 + Y2 * mu)
    return AuxBundle(rho, rho0, rho1, rho2, delta, eps, mu, tau, lam, eta, Yv, A)


def aux_quantities(C: CubicSpec, x, y) -> AuxBundle:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a, _ = metric_and_derivatives(C.alpha, x)
    b, _ = one_form_and_derivatives(C.beta, x)
    alpha = float(np.sqrt(y @ a @ y))
    s = float(b @ y) / alpha
    B = float(b @ np.linalg.solve(a, b))
    phi, dphi, ddphi = (float(v) for v in phi_derivatives(C.p, C.q, s))
    out = aux_from_profile(phi, dphi, ddphi, s, B, a.tolist(), b.tolist(), y.tolist())
    return AuxBundle(**{k: (np.array(v) if k == "A" else v) for k, v in out.__dict__.items()})


# weak isotropy -------------------------------------------------------------------


@dataclass(frozen=True)
class IsotropyFit:
    theta: np.ndarray
    isoMu: float
    residual: float


def fit_weakly_isotropic(ys, r_values, F_values, n: int) -> IsotropyFit:
    """Least-squares fit of r = n(n-1)(theta_i y^i / F + mu) at fixed x."""
    ys = np.asarray(ys, dtype=float)
    r = np.asarray(r_values, dtype=float)
    F = np.asarray(F_values, dtype=float)
    if len(ys) < n + 2:
        raise DegenerateSampleError(f"need at least {n + 2} samples, got {len(ys)}")
    c = n * (n - 1)
    design = np.column_stack([c * ys / F[:, None], np.full(len(ys), float(c))])
    if np.linalg.matrix_rank(design) < n + 1:
        raise DegenerateSampleError("sample directions are degenerate (rank-deficient design)")
    coef, *_ = np.linalg.lstsq(design, r, rcond=None)
    resid = float(np.sqrt(np.mean((design @ coef - r) ** 2)))
    return IsotropyFit(coef[:n], float(coef[n]), resid)
