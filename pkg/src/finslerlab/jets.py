"""Dense truncated multivariate Taylor arithmetic.

A :class:`Jet` stores the Taylor coefficients of a smooth function at an
expansion point for every multi-index in a :class:`JetSpace`.  A space is the
set of multi-indices of total degree <= ``order``, optionally further limited
by per-block degree caps (e.g. "at most 2 derivatives in the x block").  Caps
only ever truncate; they never assert that the dropped coefficients vanish.

Coefficient arrays have shape ``(space.size, *batch)`` so one jet can hold
expansions at many points at once.
"""

from __future__ import annotations

import functools
import math
from fractions import Fraction
from numbers import Rational

import numpy as np

from .errors import DomainError, TruncationError
from .fields import FLOAT, Field, binomial, factorial_inv


class JetSpace:
    def __init__(self, nvars: int, order: int, caps: tuple = ()):
        if nvars < 1 or order < 0:
            raise ValueError("need nvars >= 1 and order >= 0")
        self.nvars = nvars
        self.order = order
        self.caps = caps
        monos = [
            a
            for d in range(order + 1)
            for a in _compositions(d, nvars)
            if all(sum(a[s:e]) <= c for s, e, c in caps)
        ]
        self.monomials = np.array(monos, dtype=np.int64).reshape(len(monos), nvars)
        self.index = {m: i for i, m in enumerate(monos)}
        self.size = len(monos)
        self._radix = order + 1
        self._keys = self.monomials @ (self._radix ** np.arange(nvars))

    def __repr__(self):
        return f"JetSpace(nvars={self.nvars}, order={self.order}, caps={self.caps})"

    def __contains__(self, alpha) -> bool:
        return tuple(alpha) in self.index

    @functools.cached_property
    def mul_table(self):
        """Index pairs (i, j) with monomial_i + monomial_j in the space, grouped by output."""
        deg = self.monomials.sum(axis=1)
        ia_all, ib_all, out_all = [], [], []
        for d in range(self.order + 1):
            rows_a = np.nonzero(deg == d)[0]
            rows_b = np.nonzero(deg <= self.order - d)[0]
            sums = self.monomials[rows_a][:, None, :] + self.monomials[rows_b][None, :, :]
            keys = sums @ (self._radix ** np.arange(self.nvars))
            order_ = np.argsort(self._keys)
            pos = np.searchsorted(self._keys, keys, sorter=order_)
            pos = np.clip(pos, 0, self.size - 1)
            hit = order_[pos]
            ok = self._keys[hit] == keys
            ok &= self._fits_caps(sums)
            ii, jj = np.nonzero(ok)
            ia_all.append(rows_a[ii])
            ib_all.append(rows_b[jj])
            out_all.append(hit[ii, jj])
        ia = np.concatenate(ia_all)
        ib = np.concatenate(ib_all)
        out = np.concatenate(out_all)
        perm = np.argsort(out, kind="stable")
        ia, ib, out = ia[perm], ib[perm], out[perm]
        starts = np.flatnonzero(np.r_[True, out[1:] != out[:-1]])
        assert len(starts) == self.size
        self.max_group = int(np.diff(np.r_[starts, len(ia)]).max())
        return ia, ib, starts

    def _fits_caps(self, sums):
        ok = sums.sum(axis=-1) <= self.order
        for s, e, c in self.caps:
            ok &= sums[..., s:e].sum(axis=-1) <= c
        return ok

    def derivative_space(self, var: int) -> "JetSpace":
        if self.order == 0:
            raise TruncationError("cannot differentiate an order-0 jet")
        caps = []
        for s, e, c in self.caps:
            if s <= var < e:
                if c == 0:
                    raise TruncationError(f"variable {var} is truncated at degree 0 in {self}")
                c -= 1
            caps.append((s, e, c))
        return jet_space(self.nvars, self.order - 1, tuple(caps))

    @functools.lru_cache(maxsize=None)
    def diff_table(self, var: int):
        target = self.derivative_space(var)
        shifted = target.monomials.copy()
        shifted[:, var] += 1
        src = np.array([self.index[tuple(m)] for m in shifted], dtype=np.int64)
        return target, src, shifted[:, var]

    @functools.lru_cache(maxsize=None)
    def projection(self, target: "JetSpace") -> np.ndarray:
        return np.array([self.index[tuple(m)] for m in target.monomials], dtype=np.int64)

    def meet(self, other: "JetSpace") -> "JetSpace":
        if other is self:
            return self
        if other.nvars != self.nvars:
            raise ValueError("jets over different variable counts")
        caps = {}
        for s, e, c in self.caps + other.caps:
            caps[(s, e)] = min(c, caps.get((s, e), c))
        return jet_space(self.nvars, min(self.order, other.order), tuple((s, e, c) for (s, e), c in caps.items()))


def _compositions(total: int, parts: int):
    """All exponent tuples of length `parts` summing to `total`, lexicographically descending."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@functools.lru_cache(maxsize=None)
def _cached_space(nvars, order, caps):
    return JetSpace(nvars, order, caps)


def jet_space(nvars: int, order: int, caps=()) -> JetSpace:
    """Canonical (cached) space; caps is an iterable of (start, stop, max_degree)."""
    merged = {}
    for s, e, c in caps:
        if c < order:
            merged[(s, e)] = min(c, merged.get((s, e), c))
    norm = tuple(sorted((s, e, c) for (s, e), c in merged.items()))
    return _cached_space(nvars, order, norm)


class Jet:
    """Immutable truncated Taylor expansion; see the module docstring."""

    __slots__ = ("space", "field", "c")
    __array_priority__ = 100

    def __init__(self, space: JetSpace, field: Field, coeffs: np.ndarray):
        self.space = space
        self.field = field
        self.c = coeffs

    # constructors -----------------------------------------------------------
    @classmethod
    def constant(cls, space, value, field=FLOAT, batch_shape=None):
        val = field.coerce(value)
        if batch_shape is not None:
            val = np.broadcast_to(val, batch_shape)
        c = field.zeros((space.size,) + val.shape)
        c[0] = val
        return cls(space, field, c)

    @classmethod
    def variable(cls, space, var, value, field=FLOAT):
        if not 0 <= var < space.nvars:
            raise IndexError(f"variable index {var} out of range for {space.nvars} variables")
        jet = cls.constant(space, value, field)
        unit = tuple(int(i == var) for i in range(space.nvars))
        if unit in space.index:
            jet.c[space.index[unit]] = field.coerce(1)
        return jet

    # inspection ---------------------------------------------------------------
    @property
    def value(self) -> np.ndarray:
        return self.c[0]

    @property
    def batch_shape(self):
        return self.c.shape[1:]

    @property
    def order(self):
        return self.space.order

    def coefficient(self, alpha) -> np.ndarray:
        alpha = tuple(alpha)
        if len(alpha) != self.space.nvars:
            raise ValueError("multi-index length does not match the variable count")
        if alpha not in self.space.index:
            raise TruncationError(f"multi-index {alpha} lies outside {self.space}")
        return self.c[self.space.index[alpha]]

    def partial(self, alpha) -> np.ndarray:
        """Mixed partial derivative at the expansion point (coefficient times alpha!)."""
        scale = math.prod(math.factorial(a) for a in alpha)
        return self.field.norm(self.coefficient(alpha) * scale)

    def __repr__(self):
        return f"Jet({self.space}, field={self.field.name}, value={self.value!r})"

    # structural ops ---------------------------------------------------------
    def truncate(self, space: JetSpace) -> "Jet":
        if space is self.space:
            return self
        return Jet(space, self.field, self.c[self.space.projection(space)])

    def diff(self, var: int) -> "Jet":
        target, src, fac = self.space.diff_table(var)
        fac = fac.reshape((-1,) + (1,) * len(self.batch_shape))
        return Jet(target, self.field, self.field.norm(self.c[src] * fac))

    def without_constant(self) -> "Jet":
        c = self.c.copy()
        c[0] = self.field.zeros(self.batch_shape)
        return Jet(self.space, self.field, c)

    # arithmetic -------------------------------------------------------------
    def _align(self, other):
        if isinstance(other, Jet):
            if other.field is not self.field:
                raise TypeError("jets over different fields")
            space = self.space.meet(other.space)
            return self.truncate(space), other.truncate(space)
        return self, None

    def _scalar(self, other):
        return self.field.coerce(other)

    def __add__(self, other):
        a, b = self._align(other)
        if b is not None:
            return Jet(a.space, a.field, a.field.norm(a.c + b.c))
        c = self.c.copy()
        c[0] = self.field.norm(c[0] + self._scalar(other))
        return Jet(self.space, self.field, c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.space, self.field, self.field.norm(-self.c))

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        a, b = self._align(other)
        if b is None:
            s = self._scalar(other)
            return Jet(self.space, self.field, self.field.norm(self.c * s))
        ia, ib, starts = a.space.mul_table
        prod = a.c[ia] * b.c[ib]
        room = a.field.headroom
        if room is not None and room < a.space.max_group:
            prod = a.field.norm(prod)
        return Jet(a.space, a.field, a.field.norm(np.add.reduceat(prod, starts, axis=0)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.recip()
        return self * self.field.inv(self._scalar(other))

    def __rtruediv__(self, other):
        return self.recip() * other

    def __pow__(self, exponent):
        return apply_smooth("pow", self, exponent)

    def recip(self) -> "Jet":
        return apply_smooth("recip", self)

    def compose(self, coeffs) -> "Jet":
        """sum_k coeffs[k] * (self - value)**k, with coeffs[k] batch-shaped arrays."""
        h = self.without_constant()
        out = Jet.constant(self.space, coeffs[-1], self.field, self.batch_shape)
        for ck in reversed(coeffs[:-1]):
            out = out * h + ck
        return out


def seed(values, var_index=None, order=1, *, nvars=None, field=FLOAT, space=None) -> Jet:
    """Coordinate jet of variable `var_index` at point `values`, or a constant jet.

    With ``var_index=None`` the result is the constant jet ``values`` in
    ``nvars`` variables.  Otherwise ``values`` is the full expansion point.
    """
    if var_index is None:
        if space is None:
            if nvars is None:
                raise ValueError("constant seed needs nvars or space")
            space = jet_space(nvars, order)
        return Jet.constant(space, values, field)
    point = list(values) if not isinstance(values, np.ndarray) else values
    if space is None:
        space = jet_space(len(point), order)
    if not 0 <= var_index < space.nvars:
        raise IndexError(f"variable index {var_index} out of range for {space.nvars} variables")
    return Jet.variable(space, var_index, point[var_index], field)


SMOOTH_FUNCTIONS = ("pow", "sqrt", "cbrt", "exp", "sin", "cos", "recip")


def _as_fraction(r) -> Fraction:
    if isinstance(r, Rational):
        return Fraction(r)
    if isinstance(r, float) and r.is_integer():
        return Fraction(int(r))
    raise TypeError(f"exponent must be rational, got {r!r}")


def _fmt(v):
    return str(v.item() if isinstance(v, np.generic) else v)


def _pow_coeffs(field, v0, r: Fraction, K: int, name: str):
    """Taylor coefficients of t -> (v0 + t)**r up to degree K."""
    integral = r.denominator == 1
    if integral and r >= 0:
        n = int(r)
        return [
            field.norm(field.coerce(math.comb(n, k)) * field.power(v0, n - k)) if k <= n else field.zeros(v0.shape)
            for k in range(K + 1)
        ]
    zero = field.is_zero(v0)
    if np.any(zero) and (K > 0 or r < 0):
        raise DomainError(f"{name} is singular at argument {_fmt(np.ravel(v0)[np.ravel(zero)][0])}")
    if not field.exact:
        if not integral and r.denominator % 2 == 0 and np.any(v0 < 0):
            raise DomainError(f"{name} of negative argument {_fmt(np.min(v0))}")
    base = field.power(v0, int(r)) if integral else field.root(v0, r)
    out = [base]
    if K:
        vinv = field.inv(v0)
        vpow = field.ones(v0.shape)
        for k in range(1, K + 1):
            vpow = field.norm(vpow * vinv)
            out.append(field.norm(field.norm(base * vpow) * field.coerce(binomial(r, k))))
    return out


def _taylor_coeffs(name, v0, K, field, exponent=None):
    if name == "pow":
        return _pow_coeffs(field, v0, _as_fraction(exponent), K, "pow")
    if name == "sqrt":
        if not field.exact and np.any(v0 < 0):
            raise DomainError(f"sqrt of negative argument {_fmt(np.min(v0))}")
        return _pow_coeffs(field, v0, Fraction(1, 2), K, "sqrt")
    if name == "cbrt":
        return _pow_coeffs(field, v0, Fraction(1, 3), K, "cbrt")
    if name == "recip":
        return _pow_coeffs(field, v0, Fraction(-1), K, "recip")
    if name in ("exp", "sin", "cos"):
        if field.exact:
            if not np.all(field.is_zero(v0)):
                raise DomainError(f"{name} is only exact at argument 0")
            if name == "exp":
                cyc = [1, 1, 1, 1]
            elif name == "sin":
                cyc = [0, 1, 0, -1]
            else:
                cyc = [1, 0, -1, 0]
            return [field.norm(field.coerce(cyc[k % 4]) * factorial_inv(field, k, v0.shape)) for k in range(K + 1)]
        if name == "exp":
            e = np.exp(v0)
            return [e / math.factorial(k) for k in range(K + 1)]
        s, c = np.sin(v0), np.cos(v0)
        cyc = [s, c, -s, -c] if name == "sin" else [c, -s, -c, s]
        return [cyc[k % 4] / math.factorial(k) for k in range(K + 1)]
    raise ValueError(f"unknown smooth function {name!r}; expected one of {SMOOTH_FUNCTIONS}")


def apply_smooth(name: str, jet: Jet, exponent=None) -> Jet:
    """Truncated Taylor expansion of f(jet) for an elementary function f."""
    coeffs = _taylor_coeffs(name, jet.value, jet.order, jet.field, exponent)
    return jet.compose(coeffs)


# small dense linear algebra over jets --------------------------------------


def matmul(a, b):
    n, k, m = len(a), len(b), len(b[0])
    return [[_dot([a[i][l] for l in range(k)], [b[l][j] for l in range(k)]) for j in range(m)] for i in range(n)]


def _dot(xs, ys):
    out = xs[0] * ys[0]
    for x, y in zip(xs[1:], ys[1:]):
        out = out + x * y
    return out


def matinv(a):
    """Inverse of a square matrix of jets by Newton iteration from the constant part."""
    n = len(a)
    first = a[0][0]
    field, space = first.field, first.space
    for row in a:
        for x in row:
            space = space.meet(x.space)
    a = [[x.truncate(space) for x in row] for row in a]
    const = np.array([[a[i][j].value for j in range(n)] for i in range(n)], dtype=field.dtype)
    inv0 = field.matinv(const)
    x = [[Jet.constant(space, inv0[i, j], field) for j in range(n)] for i in range(n)]
    correct = 1
    while correct <= space.order:
        # an iterate exact below degree c becomes exact below 2c, so each
        # step only needs that much precision
        sub = jet_space(space.nvars, min(2 * correct - 1, space.order), space.caps)
        a_s = [[e.truncate(sub) for e in row] for row in a]
        x_s = [[e.truncate(sub) for e in row] for row in x]
        ax = matmul(a_s, x_s)
        resid = [[(2 if i == j else 0) - ax[i][j] for j in range(n)] for i in range(n)]
        x = [[_embed(e, space) for e in row] for row in matmul(x_s, resid)]
        correct *= 2
    return x


def _embed(jet: Jet, space: JetSpace) -> Jet:
    """Zero-padded copy of a jet in a larger space."""
    if jet.space is space:
        return jet
    c = jet.field.zeros((space.size,) + jet.batch_shape)
    c[space.projection(jet.space)] = jet.c
    return Jet(space, jet.field, c)


def stack_values(mat) -> np.ndarray:
    """Nested list of jets -> array of their values, shape (rows, cols, *batch)."""
    return np.array([[x.value for x in row] for row in mat])


def identity_jets(space, n, field, batch_shape=()):
    return [[Jet.constant(space, int(i == j), field, batch_shape) for j in range(n)] for i in range(n)]


def all_multi_indices(nvars, order):
    return [a for d in range(order + 1) for a in _compositions(d, nvars)]


__all__ = [
    "Jet",
    "JetSpace",
    "jet_space",
    "seed",
    "apply_smooth",
    "matmul",
    "matinv",
    "SMOOTH_FUNCTIONS",
    "all_multi_indices",
    "stack_values",
    "identity_jets",
]
