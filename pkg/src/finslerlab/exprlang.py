"""Coefficient expressions in the base-point variables x1..xn.

Grammar (lowest to highest precedence)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' exponent)?          # right associative
    exponent:= unary-level expression folding to a rational constant
    atom    := NUMBER | 'x' INT | FUNC '(' expr ')' | '(' expr ')'

``FUNC`` is one of sin, cos, exp, sqrt, cbrt.  Numbers are integers or finite
decimals and are stored exactly.  There is no implicit multiplication.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DomainError, ParseError
from .fields import FLOAT, Field
from .jets import Jet, JetSpace, apply_smooth, jet_space

FUNCTIONS = ("sin", "cos", "exp", "sqrt", "cbrt")


class Expr:
    """Base class of the immutable expression tree."""

    def __str__(self):
        return to_text(self)

    def variables(self) -> set[int]:
        out: set[int] = set()
        for node in walk(self):
            if isinstance(node, Var):
                out.add(node.index)
        return out


@dataclass(frozen=True)
class Num(Expr):
    value: Fraction


@dataclass(frozen=True)
class Var(Expr):
    index: int  # 1-based


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str  # one of + - * /
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: Fraction


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr


def walk(e: Expr):
    yield e
    if isinstance(e, Neg):
        yield from walk(e.operand)
    elif isinstance(e, BinOp):
        yield from walk(e.left)
        yield from walk(e.right)
    elif isinstance(e, Pow):
        yield from walk(e.base)
    elif isinstance(e, Call):
        yield from walk(e.arg)


# Convenience constructors used when metrics are assembled programmatically.
def const(v) -> Num:
    return Num(Fraction(v))


def mul(a: Expr, b: Expr) -> Expr:
    return BinOp("*", a, b)


def add(a: Expr, b: Expr) -> Expr:
    return BinOp("+", a, b)


def is_constant(e: Expr) -> bool:
    return not e.variables()


# tokenizer -----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?|\.\d+)|(?P<var>x\d+)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos:].lstrip()[0]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, dimension: int | None):
        self.text = text
        self.dimension = dimension
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, pos = self.take()
        if val != value:
            raise ParseError(f"expected {value!r} but found {val or 'end of input'!r}", pos)

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {val!r}", pos)
        return e

    def expr(self):
        left = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            left = BinOp(op, left, self.term())
        return left

    def term(self):
        left = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            left = BinOp(op, left, self.unary())
        return left

    def unary(self):
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            _, _, pos = self.take()
            exp_expr = self.unary()
            value = fold_constant(exp_expr)
            if value is None:
                raise ParseError("exponent must be a rational literal", pos)
            return Pow(base, value)
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Num(Fraction(val))
        if kind == "var":
            idx = int(val[1:])
            if idx < 1:
                raise ParseError("variables are numbered from x1", pos)
            if self.dimension is not None and idx > self.dimension:
                raise ParseError(f"variable index exceeds dimension: {val} with n={self.dimension}", pos)
            return Var(idx)
        if kind == "name":
            if val not in FUNCTIONS:
                raise ParseError(f"unknown function {val!r}", pos)
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Call(val, arg)
        if val == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "end":
            raise ParseError("unexpected end of input", pos)
        raise ParseError(f"unexpected token {val!r}", pos)


def fold_constant(e: Expr) -> Fraction | None:
    """Exact value of a variable-free, function-free expression, else None."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Neg):
        v = fold_constant(e.operand)
        return None if v is None else -v
    if isinstance(e, BinOp):
        a, b = fold_constant(e.left), fold_constant(e.right)
        if a is None or b is None:
            return None
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        return None if b == 0 else a / b
    if isinstance(e, Pow):
        v = fold_constant(e.base)
        if v is None or e.exponent.denominator != 1 or (v == 0 and e.exponent < 0):
            return None
        return v ** int(e.exponent)
    return None


def parse(text: str, dimension: int | None = None) -> Expr:
    """Parse an expression; variable indices are checked against `dimension`."""
    if not isinstance(text, str):
        text = str(text)
    if not text.strip():
        raise ParseError("empty expression", 0)
    return _Parser(text, dimension).parse()


# printing ------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}
_UNARY = 3
_POW = 4
_ATOM = 5


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return _UNARY
    if isinstance(e, Pow):
        return _POW
    if isinstance(e, Num) and e.value < 0:
        return _UNARY
    return _ATOM


def _num_text(v: Fraction) -> str:
    if v.denominator == 1:
        return str(v.numerator)
    d = v.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d == 1:
        places = max(twos, fives)
        scaled = abs(v) * 10**places
        whole, frac = divmod(int(scaled), 10**places)
        sign = "-" if v < 0 else ""
        return f"{sign}{whole}.{frac:0{places}d}"
    return f"({v.numerator}/{v.denominator})"


def _exp_text(r: Fraction) -> str:
    if r.denominator == 1 and r >= 0:
        return str(r.numerator)
    if r.denominator == 1:
        return f"({r.numerator})"
    return f"({r.numerator}/{r.denominator})"


def to_text(e: Expr) -> str:
    """Canonical text with the minimum parentheses needed to re-parse identically."""
    if isinstance(e, Num):
        return _num_text(e.value)
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Call):
        return f"{e.func}({to_text(e.arg)})"
    if isinstance(e, Neg):
        inner = to_text(e.operand)
        if _prec(e.operand) < _UNARY:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, Pow):
        base = to_text(e.base)
        if _prec(e.base) < _ATOM:
            base = f"({base})"
        return f"{base}^{_exp_text(e.exponent)}"
    p = _PREC[e.op]
    left = to_text(e.left)
    if _prec(e.left) < p:
        left = f"({left})"
    right = to_text(e.right)
    if _prec(e.right) <= p and _prec(e.right) < _UNARY:
        right = f"({right})"
    return f"{left} {e.op} {right}"


# evaluation ----------------------------------------------------------------


def eval_jet(
    e: Expr,
    point,
    order: int | None = None,
    *,
    space: JetSpace | None = None,
    offset: int = 0,
    field: Field = FLOAT,
    _cache: dict | None = None,
) -> Jet:
    """Jet of the expression at `point`.

    ``point`` has shape ``(n,)`` or ``(*batch, n)``.  Variable ``x_i`` is
    seeded as jet variable ``offset + i - 1``; without an explicit space the
    jet lives in ``n`` variables truncated at ``order``.
    """
    pt = point if isinstance(point, np.ndarray) and point.dtype != object else np.asarray(point, dtype=object)
    n = pt.shape[-1]
    if space is None:
        space = jet_space(n, 1 if order is None else order)
    cache = {} if _cache is None else _cache
    return _eval(e, pt, space, offset, field, cache)


def _eval(e, pt, space, offset, field, cache):
    key = id(e)
    hit = cache.get(key)
    if hit is not None and hit[0] is e:
        return hit[1]
    if isinstance(e, Num):
        out = Jet.constant(space, field.coerce(e.value), field, pt.shape[:-1])
    elif isinstance(e, Var):
        if e.index > pt.shape[-1]:
            raise IndexError(f"variable x{e.index} but the point has {pt.shape[-1]} coordinates")
        out = Jet.variable(space, offset + e.index - 1, field.coerce(pt[..., e.index - 1]), field)
    elif isinstance(e, Neg):
        out = -_eval(e.operand, pt, space, offset, field, cache)
    elif isinstance(e, BinOp):
        a = _eval(e.left, pt, space, offset, field, cache)
        b = _eval(e.right, pt, space, offset, field, cache)
        if e.op == "+":
            out = a + b
        elif e.op == "-":
            out = a - b
        elif e.op == "*":
            out = a * b
        else:
            if np.any(field.is_zero(b.value)):
                raise DomainError(f"division by zero in {to_text(e.right)!r}")
            out = a * b.recip()
    elif isinstance(e, Pow):
        base = _eval(e.base, pt, space, offset, field, cache)
        try:
            out = apply_smooth("pow", base, e.exponent)
        except DomainError as err:
            raise _located(err, e) from None
    elif isinstance(e, Call):
        arg = _eval(e.arg, pt, space, offset, field, cache)
        try:
            out = apply_smooth(e.func, arg)
        except DomainError as err:
            raise _located(err, e) from None
    else:
        raise TypeError(f"not an expression: {e!r}")
    cache[key] = (e, out)
    return out


def _located(err: DomainError, e: Expr) -> DomainError:
    if getattr(err, "located", False):
        return err
    out = DomainError(f"{err} at {to_text(e)!r}")
    out.located = True
    return out


def eval_float(e: Expr, point) -> np.ndarray:
    """Plain value of the expression at `point` (shape ``(*batch, n)``)."""
    pt = np.asarray(point, dtype=float)
    return eval_jet(e, pt, space=jet_space(pt.shape[-1], 0)).value
