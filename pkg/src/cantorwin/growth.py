"""Growth functions g(q) written as small arithmetic expressions.

The accepted language is intentionally narrow: the variable ``q``, integer
or rational constants, ``*``, ``/``, ``+``, powers with rational constant
exponents, and the functions ``logstar`` (log* q = max(1, log q)), ``log``
and ``loglogstar`` (log of log*). Examples: ``"q"``, ``"logstar(q)**2"``,
``"3/2*logstar(q)*loglogstar(q)"``.

Values are returned as :class:`~cantorwin.exact.CReal` so that callers can
compare them against rationals without trusting floating point.
"""
from __future__ import annotations

import ast
import math
from fractions import Fraction
from functools import lru_cache

from mpmath import iv

from .errors import ConfigError
from .exact import CReal, iv_bounds, iv_of, ivprec

_FUNCS = ("logstar", "log", "loglogstar")


class _NotExact(Exception):
    pass


def _const(node) -> Fraction:
    """Fold a constant sub-expression (used for exponents)."""
    if isinstance(node, ast.Constant) and isinstance(node.value, int) and not isinstance(node.value, bool):
        return Fraction(node.value)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
        return -_const(node.operand)
    if isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Div, ast.Mult, ast.Add, ast.Sub)):
        a, b = _const(node.left), _const(node.right)
        if isinstance(node.op, ast.Div):
            return a / b
        if isinstance(node.op, ast.Mult):
            return a * b
        return a + b if isinstance(node.op, ast.Add) else a - b
    raise ConfigError("exponents must be rational constants")


def _check(node):
    if isinstance(node, ast.Expression):
        return _check(node.body)
    if isinstance(node, ast.Name):
        if node.id != "q":
            raise ConfigError(f"unknown variable {node.id!r} in growth function (use q)")
        return
    if isinstance(node, ast.Constant):
        if not isinstance(node.value, int) or isinstance(node.value, bool):
            raise ConfigError("only integer literals are allowed; write rationals as a/b")
        return
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
        return _check(node.operand)
    if isinstance(node, ast.BinOp):
        if isinstance(node.op, ast.Pow):
            _check(node.left)
            _const(node.right)
            return
        if isinstance(node.op, (ast.Mult, ast.Div, ast.Add, ast.Sub)):
            _check(node.left)
            _check(node.right)
            return
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS:
        if len(node.args) != 1 or node.keywords:
            raise ConfigError(f"{node.func.id} takes exactly one argument")
        return _check(node.args[0])
    raise ConfigError(f"unsupported construct in growth function: {ast.dump(node)[:60]}")


def _ev_iv(node, q):
    if isinstance(node, ast.Name):
        return iv_of(q)
    if isinstance(node, ast.Constant):
        return iv.mpf(node.value)
    if isinstance(node, ast.UnaryOp):
        return -_ev_iv(node.operand, q)
    if isinstance(node, ast.BinOp):
        a = _ev_iv(node.left, q)
        if isinstance(node.op, ast.Pow):
            r = _const(node.right)
            if r.denominator == 1 and r >= 0:
                return a ** int(r)
            return iv.exp(iv_of(r) * iv.log(a))
        b = _ev_iv(node.right, q)
        if isinstance(node.op, ast.Mult):
            return a * b
        if isinstance(node.op, ast.Div):
            return a / b
        return a + b if isinstance(node.op, ast.Add) else a - b
    name = node.func.id
    a = _ev_iv(node.args[0], q)
    if name == "log":
        return iv.log(a)
    ls = _logstar_iv(a)
    return ls if name == "logstar" else iv.log(ls)


def _logstar_iv(a):
    lg = iv.log(a)
    lo, hi = lg.a, lg.b
    one = iv.mpf(1)
    lo = one if lo < 1 else lo
    hi = one if hi < 1 else hi
    return iv.mpf([lo.a, hi.b])


_E_UPPER = Fraction(27183, 10000)   # e < 2.7183
_E_LOWER = Fraction(27182, 10000)   # e > 2.7182


def _ev_exact(node, q: Fraction) -> Fraction:
    if isinstance(node, ast.Name):
        return Fraction(q)
    if isinstance(node, ast.Constant):
        return Fraction(node.value)
    if isinstance(node, ast.UnaryOp):
        return -_ev_exact(node.operand, q)
    if isinstance(node, ast.BinOp):
        a = _ev_exact(node.left, q)
        if isinstance(node.op, ast.Pow):
            r = _const(node.right)
            if r.denominator != 1:
                raise _NotExact
            return a ** int(r)
        b = _ev_exact(node.right, q)
        if isinstance(node.op, ast.Mult):
            return a * b
        if isinstance(node.op, ast.Div):
            return a / b
        return a + b if isinstance(node.op, ast.Add) else a - b
    name = node.func.id
    a = _ev_exact(node.args[0], q)
    if name == "log":
        if a == 1:
            return Fraction(0)
        raise _NotExact
    if a < _E_LOWER:
        ls = Fraction(1)
    else:
        raise _NotExact
    return ls if name == "logstar" else Fraction(0)


class Growth:
    """A monotone growth function parsed from text."""

    def __init__(self, text: str):
        self.text = str(text).strip()
        try:
            tree = ast.parse(self.text, mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"cannot parse growth function {text!r}: {exc.msg}") from exc
        _check(tree)
        self._body = tree.body
        self._cache = lru_cache(maxsize=65536)(self._real)

    def __repr__(self):
        return f"Growth({self.text!r})"

    def __eq__(self, other):
        return isinstance(other, Growth) and other.text == self.text

    def __hash__(self):
        return hash(self.text)

    def exact(self, q) -> Fraction | None:
        try:
            return _ev_exact(self._body, Fraction(q))
        except (_NotExact, ZeroDivisionError):
            return None

    def bounds(self, q, prec: int = 64) -> tuple[Fraction, Fraction]:
        with ivprec(prec):
            return iv_bounds(_ev_iv(self._body, Fraction(q)))

    def _real(self, q: Fraction) -> CReal:
        ex = self.exact(q)
        if ex is not None:
            return CReal.of(ex)
        body = self._body
        return CReal.interval(lambda prec: self._bounds_body(body, q, prec))

    @staticmethod
    def _bounds_body(body, q, prec):
        with ivprec(prec):
            return iv_bounds(_ev_iv(body, q))

    def __call__(self, q) -> CReal:
        return self._cache(Fraction(q))

    def approx(self, q) -> float:
        lo, hi = self.bounds(q, 64)
        return float((lo + hi) / 2)


def logstar_float(x: float) -> float:
    return 1.0 if x < math.e else math.log(x)
