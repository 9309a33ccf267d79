"""Sparse multivariate polynomials with exact rational coefficients."""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable


class PolyRing:
    """A fixed, ordered list of indeterminate names."""

    def __init__(self, names: Iterable[str]):
        self.names = tuple(names)
        if len(set(self.names)) != len(self.names):
            raise ValueError("indeterminate names must be distinct")
        self.index = {s: i for i, s in enumerate(self.names)}

    def __eq__(self, other):
        return isinstance(other, PolyRing) and other.names == self.names

    def __hash__(self):
        return hash(self.names)

    def __repr__(self):
        return f"PolyRing{self.names}"

    @property
    def nvars(self):
        return len(self.names)

    def zero(self) -> "Poly":
        return Poly(self, {})

    def const(self, c) -> "Poly":
        c = Fraction(c)
        return Poly(self, {(0,) * self.nvars: c} if c else {})

    def var(self, name: str) -> "Poly":
        e = [0] * self.nvars
        e[self.index[name]] = 1
        return Poly(self, {tuple(e): Fraction(1)})

    def gens(self, *names):
        return [self.var(s) for s in names]


class Poly:
    """Immutable polynomial; ``terms`` maps exponent tuples to nonzero Fractions."""

    __slots__ = ("ring", "terms")

    def __init__(self, ring: PolyRing, terms: dict):
        self.ring = ring
        self.terms = {e: Fraction(c) for e, c in terms.items() if c != 0}

    # coercion -------------------------------------------------------------
    def _lift(self, other) -> "Poly":
        if isinstance(other, Poly):
            if other.ring != self.ring:
                raise ValueError("polynomials over different rings")
            return other
        return self.ring.const(other)

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        other = self._lift(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0) + c
        return Poly(self.ring, out)

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.ring, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        other = self._lift(other)
        out: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return Poly(self.ring, out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("polynomial powers must be non-negative integers")
        out = self.ring.const(1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __truediv__(self, c):
        if isinstance(c, Poly):
            raise TypeError("use a rational-function wrapper for polynomial division")
        c = Fraction(c)
        return Poly(self.ring, {e: v / c for e, v in self.terms.items()})

    # comparison -------------------------------------------------------------
    def __eq__(self, other):
        if not isinstance(other, Poly):
            try:
                other = self._lift(other)
            except (TypeError, ValueError):
                return NotImplemented
        return self.ring == other.ring and self.terms == other.terms

    def __hash__(self):
        return hash((self.ring, frozenset(self.terms.items())))

    def is_zero(self) -> bool:
        return not self.terms

    # calculus and structure ---------------------------------------------------
    def diff(self, name: str) -> "Poly":
        k = self.ring.index[name]
        out = {}
        for e, c in self.terms.items():
            if e[k]:
                e2 = list(e)
                e2[k] -= 1
                out[tuple(e2)] = c * e[k]
        return Poly(self.ring, out)

    def degree(self, names=None) -> int:
        """Total degree, optionally counting only the named indeterminates; -1 for zero."""
        idx = range(self.ring.nvars) if names is None else [self.ring.index[s] for s in names]
        return max((sum(e[i] for i in idx) for e in self.terms), default=-1)

    def subs(self, mapping: dict) -> "Poly":
        """Substitute polynomials or numbers for indeterminates."""
        idx = {self.ring.index[k]: self._lift(v) for k, v in mapping.items()}
        out = self.ring.zero()
        cache: dict = {}
        for e, c in self.terms.items():
            kept = list(e)
            term = self.ring.const(c)
            for i, val in idx.items():
                if e[i]:
                    key = (i, e[i])
                    if key not in cache:
                        cache[key] = val ** e[i]
                    term = term * cache[key]
                    kept[i] = 0
            out = out + term * Poly(self.ring, {tuple(kept): 1})
        return out

    def coefficient(self, monomial: dict) -> "Poly":
        """Coefficient of the given monomial in the named indeterminates, as a polynomial in the rest."""
        idx = {self.ring.index[k]: v for k, v in monomial.items()}
        out = {}
        for e, c in self.terms.items():
            if all(e[i] == v for i, v in idx.items()):
                e2 = list(e)
                for i in idx:
                    e2[i] = 0
                out[tuple(e2)] = out.get(tuple(e2), 0) + c
        return Poly(self.ring, out)

    def coefficients_in(self, names) -> dict:
        """Split into {exponents in `names`: coefficient polynomial in the other indeterminates}."""
        idx = [self.ring.index[s] for s in names]
        groups: dict = {}
        for e, c in self.terms.items():
            key = tuple(e[i] for i in idx)
            rest = list(e)
            for i in idx:
                rest[i] = 0
            groups.setdefault(key, {})[tuple(rest)] = c
        return {k: Poly(self.ring, v) for k, v in groups.items()}

    def constant_value(self) -> Fraction:
        if any(any(e) for e in self.terms):
            raise ValueError("polynomial is not constant")
        return self.terms.get((0,) * self.ring.nvars, Fraction(0))

    def sorted_terms(self):
        """Terms in graded reverse-lexicographic order (highest first)."""
        return sorted(self.terms.items(), key=lambda t: (sum(t[0]), t[0]), reverse=True)

    def __repr__(self):
        return f"Poly({self})"

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for e, c in self.sorted_terms():
            mono = "*".join(
                s if k == 1 else f"{s}^{k}" for s, k in zip(self.ring.names, e) if k
            )
            if not mono:
                parts.append(str(c))
            elif c == 1:
                parts.append(mono)
            elif c == -1:
                parts.append(f"-{mono}")
            else:
                parts.append(f"{c}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")


def quadratic_form(ring: PolyRing, matrix, names) -> Poly:
    ys = ring.gens(*names)
    out = ring.zero()
    for i, yi in enumerate(ys):
        for j, yj in enumerate(ys):
            if matrix[i][j]:
                out = out + yi * yj * matrix[i][j]
    return out


def linear_form(ring: PolyRing, vector, names) -> Poly:
    out = ring.zero()
    for c, y in zip(vector, ring.gens(*names)):
        out = out + y * c
    return out


def hessian_contraction(E: Poly, names, u, v) -> Poly:
    """sum_ij d^2E/dy^i dy^j u^i v^j."""
    out = E.ring.zero()
    for i, a in enumerate(names):
        Ei = E.diff(a)
        for j, b in enumerate(names):
            out = out + Ei.diff(b) * u[i] * v[j]
    return out


def gradient_contraction(E: Poly, names, u) -> Poly:
    out = E.ring.zero()
    for i, a in enumerate(names):
        out = out + E.diff(a) * u[i]
    return out
