"""Scalar fields for jet arithmetic.

Three coefficient fields are supported, all stored as numpy arrays so that a
jet can carry a batch of expansion points at once:

* ``FLOAT``: double precision, used by the curvature pipelines.
* ``RATIONAL``: exact :class:`fractions.Fraction` values in object arrays.
* ``ModularField(p)``: the integers modulo a prime, a homomorphic image of
  the rationals used for fast exact identity testing.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .errors import DefinitenessError, DomainError


def _integer_root(n: int, k: int) -> int | None:
    """Exact k-th root of a non-negative integer, or None."""
    if n < 2:
        return n
    r = round(n ** (1.0 / k))
    for cand in (r - 1, r, r + 1):
        if cand >= 0 and cand**k == n:
            return cand
    # float estimate can be off for huge ints; fall back to Newton
    x = 1 << ((n.bit_length() + k - 1) // k)
    while True:
        y = ((k - 1) * x + n // x ** (k - 1)) // k
        if y >= x:
            break
        x = y
    return x if x**k == n else None


def binomial(r: Fraction, k: int) -> Fraction:
    """Generalized binomial coefficient C(r, k) for rational r."""
    out = Fraction(1)
    for i in range(k):
        out = out * (r - i) / (i + 1)
    return out


class Field:
    """Common interface; subclasses override the arithmetic hooks."""

    name = "abstract"
    exact = False
    headroom = None  # no reduction needed
    dtype: type | np.dtype = object

    def coerce(self, value) -> np.ndarray:
        raise NotImplementedError

    def zeros(self, shape) -> np.ndarray:
        return self.coerce(np.zeros(shape, dtype=np.int64))

    def ones(self, shape) -> np.ndarray:
        return self.coerce(np.ones(shape, dtype=np.int64))

    def norm(self, a: np.ndarray) -> np.ndarray:
        return a

    def inv(self, a: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def is_zero(self, a) -> np.ndarray:
        return np.asarray(a == 0, dtype=bool)

    def root(self, a: np.ndarray, r: Fraction) -> np.ndarray:
        """a**r for non-integer rational r, when representable in the field."""
        raise NotImplementedError

    def power(self, a: np.ndarray, k: int) -> np.ndarray:
        if k < 0:
            return self.power(self.inv(a), -k)
        out = self.ones(np.shape(a))
        base = a
        while k:
            if k & 1:
                out = self.norm(out * base)
            base = self.norm(base * base)
            k >>= 1
        return out

    def to_float(self, a) -> np.ndarray:
        return np.asarray(a, dtype=float)

    def matinv(self, m: np.ndarray) -> np.ndarray:
        """Invert a stack of matrices shaped (n, n, *batch) without pivot search."""
        n = m.shape[0]
        a = [[m[i, j].copy() for j in range(n)] for i in range(n)]
        e = [[self.ones(m.shape[2:]) if i == j else self.zeros(m.shape[2:]) for j in range(n)] for i in range(n)]
        for col in range(n):
            piv = a[col][col]
            if np.any(self.is_zero(piv)):
                raise DefinitenessError("zero pivot while inverting matrix in exact field")
            pinv = self.inv(piv)
            for j in range(n):
                a[col][j] = self.norm(a[col][j] * pinv)
                e[col][j] = self.norm(e[col][j] * pinv)
            for row in range(n):
                if row == col:
                    continue
                fac = a[row][col]
                for j in range(n):
                    a[row][j] = self.norm(a[row][j] - fac * a[col][j])
                    e[row][j] = self.norm(e[row][j] - fac * e[col][j])
        return np.array(e, dtype=self.dtype)

    def __repr__(self):
        return f"<field {self.name}>"


class FloatField(Field):
    name = "float"
    dtype = np.float64

    def coerce(self, value):
        if isinstance(value, Fraction):
            return np.asarray(float(value))
        arr = np.asarray(value)
        if arr.dtype == object:
            return np.vectorize(float, otypes=[float])(arr)
        return arr.astype(np.float64)

    def inv(self, a):
        return 1.0 / a

    def root(self, a, r):
        if r.denominator % 2 == 1:
            base = np.sign(a) * np.abs(a) ** (1.0 / r.denominator)
        else:
            if np.any(a < 0):
                raise DomainError(f"even root of negative value {np.min(a)!r}")
            base = a ** (1.0 / r.denominator)
        return base**r.numerator

    def power(self, a, k):
        return np.asarray(a, dtype=float) ** k

    def matinv(self, m):
        stack = np.moveaxis(m, (0, 1), (-2, -1))
        return np.moveaxis(np.linalg.inv(stack), (-2, -1), (0, 1))


class RationalField(Field):
    name = "rational"
    exact = True
    dtype = object

    def coerce(self, value):
        arr = np.asarray(value, dtype=object)
        out = np.empty(arr.shape, dtype=object)
        flat = out.reshape(-1)
        for i, v in enumerate(arr.reshape(-1)):
            flat[i] = v if isinstance(v, Fraction) else Fraction(v)
        return out

    def inv(self, a):
        return self.coerce(np.frompyfunc(lambda v: 1 / Fraction(v), 1, 1)(a))

    def root(self, a, r):
        def one(v):
            v = Fraction(v)
            k = r.denominator
            if v < 0 and k % 2 == 0:
                raise DomainError(f"even root of negative value {v}")
            sgn = -1 if v < 0 else 1
            num = _integer_root(abs(v.numerator), k)
            den = _integer_root(v.denominator, k)
            if num is None or den is None:
                raise DomainError(f"{v}**({r}) is not rational; use the float or modular field")
            return Fraction(sgn * num, den) ** r.numerator

        return self.coerce(np.frompyfunc(one, 1, 1)(np.asarray(a, dtype=object)))

    def to_float(self, a):
        return np.vectorize(float, otypes=[float])(np.asarray(a, dtype=object))


class ModularField(Field):
    """Integers modulo a prime below 2**31, so products fit in int64.

    ``headroom`` is how many unreduced products can be summed without
    overflow; jet multiplication uses it to skip intermediate reductions.
    """

    exact = True
    dtype = np.int64

    def __init__(self, p: int = 268_435_399):
        if p >= 2**31 or p < 3:
            raise ValueError("modulus must be an odd prime below 2**31")
        self.p = p
        self.name = f"mod{p}"
        self.headroom = (2**63 - 1) // (p - 1) ** 2

    def coerce(self, value):
        arr = np.asarray(value)
        if arr.dtype.kind in "iub":
            return np.mod(arr.astype(np.int64), self.p)
        if arr.dtype.kind == "f":
            if not np.all(np.mod(arr, 1) == 0):
                raise DomainError("non-integral float cannot enter the modular field")
            return np.mod(arr.astype(np.int64), self.p)
        out = np.empty(arr.shape, dtype=np.int64)
        flat = out.reshape(-1)
        for i, v in enumerate(arr.reshape(-1)):
            v = Fraction(v)
            den = v.denominator % self.p
            if den == 0:
                raise DomainError(f"denominator of {v} vanishes modulo {self.p}")
            flat[i] = (v.numerator % self.p) * pow(den, -1, self.p) % self.p
        return out

    def norm(self, a):
        return np.mod(a, self.p)

    def power(self, a, k):
        if k < 0:
            return self.power(self.inv(a), -k)
        out = np.ones(np.shape(a), dtype=np.int64)
        base = np.mod(np.asarray(a, dtype=np.int64), self.p)
        while k:
            if k & 1:
                out = out * base % self.p
            base = base * base % self.p
            k >>= 1
        return out

    def inv(self, a):
        a = np.mod(np.asarray(a, dtype=np.int64), self.p)
        if np.any(a == 0):
            raise ZeroDivisionError(f"inverse of 0 modulo {self.p}")
        return self.power(a, self.p - 2)

    def is_zero(self, a):
        return np.mod(np.asarray(a), self.p) == 0

    def root(self, a, r):
        a = np.mod(np.asarray(a, dtype=np.int64), self.p)
        if not np.all(a == 1):
            raise DomainError(
                f"fractional power {r} is only representable modulo p at value 1; normalize first"
            )
        return np.ones(a.shape, dtype=np.int64)

    def to_float(self, a):
        raise TypeError("modular residues have no float value")


FLOAT = FloatField()
RATIONAL = RationalField()
MOD_P = ModularField()


def get_field(name) -> Field:
    if isinstance(name, Field):
        return name
    table = {"float": FLOAT, "rational": RATIONAL, "fraction": RATIONAL, "exact": MOD_P, "modp": MOD_P}
    try:
        return table[name]
    except KeyError:
        raise ValueError(f"unknown field {name!r}") from None


def factorial_inv(field: Field, k: int, shape=()) -> np.ndarray:
    return field.coerce(np.full(shape, Fraction(1, math.factorial(k)), dtype=object))
