"""Small expression language with forward-mode derivatives.

Grammar::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ("^" exponent)?
    exponent:= ["-" | "+"] NUMBER | "(" ["-" | "+"] NUMBER ")"
    atom    := NUMBER | NAME | FUNC "(" expr ")" | "(" expr ")"

``NAME`` is the variable (``x`` by default) or a named constant.  First
and second derivatives come from dual numbers; second derivatives by
nesting a dual inside a dual.  ``abs`` has derivative 0 at 0 by convention.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np

from ..errors import ExpressionDomainError, ExpressionSyntaxError


class Dual:
    """``re + du * eps`` with ``eps**2 = 0``.  Components may be floats,
    arrays or other duals."""

    __slots__ = ("re", "du")

    def __init__(self, re, du=0.0):
        self.re = re
        self.du = du

    def __repr__(self):
        return f"Dual({self.re!r}, {self.du!r})"

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.re + other.re, self.du + other.du)
        return Dual(self.re + other, self.du)

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.re, -self.du)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.re * other.re, self.re * other.du + self.du * other.re)
        return Dual(self.re * other, self.du * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            inv = _reciprocal(other)
            return self * inv
        return Dual(self.re / other, self.du / other)

    def __rtruediv__(self, other):
        return _reciprocal(self) * other

    def __pow__(self, p: float):
        return Dual(_pow(self.re, p), p * _pow(self.re, p - 1.0) * self.du)


def _reciprocal(a):
    if isinstance(a, Dual):
        r = _reciprocal(a.re)
        return Dual(r, -(r * r) * a.du)
    return 1.0 / a


def _pow(a, p: float):
    if isinstance(a, Dual):
        return a ** p
    if p == int(p) and p >= 0:
        return a ** int(p)
    _require(np.all(np.asarray(a) >= 0) or p == int(p), "non-integer power of a negative number")
    return np.power(a, p)


def _require(ok, msg):
    if not ok:
        raise ExpressionDomainError(msg)


def _log(a):
    _require(np.all(np.asarray(a) > 0), "log of a non-positive number")
    return np.log(a)


def _sqrt(a):
    _require(np.all(np.asarray(a) >= 0), "sqrt of a negative number")
    return np.sqrt(a)


def _sign(a):
    # derivative of abs; the convention abs'(0) = 0 is what np.sign gives
    if isinstance(a, Dual):
        return Dual(_sign(a.re), 0.0 * a.du)
    return np.sign(a)


def _make(f, df):
    def g(a):
        if isinstance(a, Dual):
            return Dual(g(a.re), df(a.re) * a.du)
        return f(a)

    return g


exp_ = _make(np.exp, lambda a: exp_(a))
log_ = _make(_log, lambda a: _reciprocal(a))
cosh_ = _make(np.cosh, lambda a: sinh_(a))
sinh_ = _make(np.sinh, lambda a: cosh_(a))
abs_ = _make(np.abs, _sign)
sqrt_ = _make(_sqrt, lambda a: 0.5 * _reciprocal(sqrt_(a)))

FUNCTIONS: dict = {"exp": exp_, "log": log_, "cosh": cosh_, "sinh": sinh_, "abs": abs_, "sqrt": sqrt_}


# --------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))")


def _tokenize(text: str):
    pos = 0
    out = []
    n = len(text)
    while pos < n:
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExpressionSyntaxError(f"unexpected character {text[bad]!r}", position=bad)
        kind = m.lastgroup
        start = m.start(kind)
        out.append((kind, m.group(kind), start))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


# AST nodes are small tuples: ("num", v) | ("var",) | ("const", name)
# | ("neg", a) | ("bin", op, a, b) | ("pow", a, p) | ("call", name, a)


class _Parser:
    def __init__(self, text: str, variable: str, constants: Mapping[str, float]):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.variable = variable
        self.constants = constants

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def fail(self, msg, tok=None):
        tok = tok or self.peek()
        raise ExpressionSyntaxError(f"{msg}", position=tok[2])

    def expect(self, value):
        tok = self.peek()
        if tok[1] != value or tok[0] == "end":
            self.fail(f"expected {value!r}")
        return self.take()

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = ("bin", op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = ("bin", op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] in ("-", "+"):
            op = self.take()[1]
            inner = self.unary()
            return ("neg", inner) if op == "-" else inner
        return self.power()

    def power(self):
        node = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            node = ("pow", node, self.exponent())
        return node

    def exponent(self):
        paren = self.peek()[1] == "(" and self.peek()[0] == "op"
        if paren:
            self.take()
        sign = 1.0
        if self.peek()[0] == "op" and self.peek()[1] in ("-", "+"):
            sign = -1.0 if self.take()[1] == "-" else 1.0
        tok = self.peek()
        if tok[0] == "num":
            value = float(self.take()[1])
        elif tok[0] == "name" and tok[1] in self.constants:
            value = float(self.constants[self.take()[1]])
        else:
            self.fail("exponent must be a number")
        if paren:
            self.expect(")")
        return sign * value

    def atom(self):
        tok = self.peek()
        if tok[0] == "num":
            self.take()
            return ("num", float(tok[1]))
        if tok[0] == "name":
            self.take()
            name = tok[1]
            if name in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return ("call", name, arg)
            if name == self.variable:
                return ("var",)
            if name in self.constants:
                return ("num", float(self.constants[name]))
            self.fail(f"unknown name {name!r}", tok)
        if tok[0] == "op" and tok[1] == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        if tok[0] == "end":
            self.fail("unexpected end of input")
        self.fail(f"unexpected {tok[1]!r}")


def _evaluate(node, x):
    kind = node[0]
    if kind == "num":
        return node[1]
    if kind == "var":
        return x
    if kind == "neg":
        return -_evaluate(node[1], x)
    if kind == "bin":
        a = _evaluate(node[2], x)
        b = _evaluate(node[3], x)
        op = node[1]
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if not isinstance(b, Dual):
            _require(np.all(np.asarray(b) != 0), "division by zero")
        else:
            re = b.re
            while isinstance(re, Dual):
                re = re.re
            _require(np.all(np.asarray(re) != 0), "division by zero")
        return a / b
    if kind == "pow":
        return _pow(_evaluate(node[1], x), node[2])
    if kind == "call":
        return FUNCTIONS[node[1]](_evaluate(node[2], x))
    raise AssertionError(kind)


@dataclass(frozen=True)
class Expression:
    """Parsed expression; calls are vectorised over numpy arrays."""

    text: str
    tree: tuple = field(repr=False)
    variable: str = "x"

    def _run(self, x):
        with np.errstate(all="ignore"):
            return _evaluate(self.tree, x)

    def __call__(self, x):
        return self.f(x)

    def _shape(self, v, x):
        if isinstance(v, Dual):
            v = v.re
        arr = np.asarray(x, dtype=float)
        out = np.broadcast_to(np.asarray(v, dtype=float), arr.shape)
        return float(out) if arr.ndim == 0 else np.array(out)

    def f(self, x):
        x = np.asarray(x, dtype=float) if not np.isscalar(x) else float(x)
        return self._shape(self._run(x), x)

    def d1(self, x):
        x = np.asarray(x, dtype=float) if not np.isscalar(x) else float(x)
        v = self._run(Dual(x, 1.0))
        return self._shape(v.du if isinstance(v, Dual) else 0.0, x)

    def d2(self, x):
        x = np.asarray(x, dtype=float) if not np.isscalar(x) else float(x)
        v = self._run(Dual(Dual(x, 1.0), Dual(1.0, 0.0)))
        if not isinstance(v, Dual):
            return self._shape(0.0, x)
        du = v.du
        return self._shape(du.du if isinstance(du, Dual) else 0.0, x)

    def triple(self, x):
        """``(f, f', f'')`` at ``x``."""
        return self.f(x), self.d1(x), self.d2(x)

    def safe(self, fill=np.inf) -> Callable:
        """Vectorised value function mapping domain errors and NaNs to ``fill``."""

        def call(x):
            arr = np.asarray(x, dtype=float)
            try:
                v = np.asarray(self.f(arr), dtype=float)
            except ExpressionDomainError:
                flat = arr.reshape(-1)
                v = np.array([_safe_point(self, t, fill) for t in flat]).reshape(arr.shape)
            return np.where(np.isnan(v), fill, v)

        return call

    def safe_d1(self, fill=np.nan) -> Callable:
        def call(x):
            arr = np.asarray(x, dtype=float)
            try:
                return np.asarray(self.d1(arr), dtype=float)
            except ExpressionDomainError:
                flat = arr.reshape(-1)
                out = []
                for t in flat:
                    try:
                        out.append(float(self.d1(float(t))))
                    except ExpressionDomainError:
                        out.append(fill)
                return np.array(out).reshape(arr.shape)

        return call


def _safe_point(e, t, fill):
    try:
        return float(e.f(float(t)))
    except ExpressionDomainError:
        return fill


def parse_expression(text: str, variable: str = "x", constants: Optional[Mapping[str, float]] = None) -> Expression:
    """Parse ``text``; raises :class:`ExpressionSyntaxError` with the offset."""
    if not isinstance(text, str):
        raise ExpressionSyntaxError("expression must be a string", position=0)
    tree = _Parser(text, variable, dict(constants or {})).parse()
    return Expression(text, tree, variable)
