"""Exact rational helpers and certified real enclosures.

Everything that decides a predicate goes through integers or ``Fraction``.
Transcendental quantities (logarithms in growth functions) are handled as
``CReal`` objects: they produce rational enclosures at any requested binary
precision via mpmath's interval context, and comparisons tighten the
precision until the answer is decided.
"""
from __future__ import annotations

import math
from contextlib import contextmanager
from fractions import Fraction
from typing import Callable, Iterable

from mpmath import iv
from mpmath.libmp import to_rational

from .errors import ConfigError, IndeterminateComparison

SLACK_BITS = 64
MAX_PREC = 4096


@contextmanager
def ivprec(prec: int):
    """Temporarily set the working precision (bits) of mpmath's interval context."""
    old = iv.prec
    iv.prec = prec
    try:
        yield
    finally:
        iv.prec = old


def iroot(n: int, k: int) -> int:
    """Floor of the k-th root of a non-negative integer."""
    if n < 0:
        raise ValueError("iroot of a negative number")
    if k == 1 or n < 2:
        return n
    if k == 2:
        return math.isqrt(n)
    x = 1 << ((n.bit_length() + k - 1) // k)
    while True:
        y = ((k - 1) * x + n // x ** (k - 1)) // k
        if y >= x:
            break
        x = y
    while x ** k > n:
        x -= 1
    while (x + 1) ** k <= n:
        x += 1
    return x


def ilog(n: int, base: int) -> int:
    """Largest e with base**e <= n (n >= 1)."""
    e, acc = 0, base
    while acc <= n:
        acc *= base
        e += 1
    return e


def to_fraction(x) -> Fraction:
    """Parse ints, Fractions, "a/b" and finite decimal strings exactly."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise ConfigError(f"not a rational: {x!r}")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, dict) and "frac" in x:
        return to_fraction(x["frac"])
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"not a rational: {x!r}") from exc
    if isinstance(x, float):
        raise ConfigError(f"floats are not accepted where exact values are required: {x!r}")
    raise ConfigError(f"not a rational: {x!r}")


def is_terminating(x: Fraction) -> bool:
    d = x.denominator
    for p in (2, 5):
        while d % p == 0:
            d //= p
    return d == 1


def decimal_str(x: Fraction, digits: int = 20) -> str:
    """Exact decimal expansion when it terminates, else rounded to `digits`."""
    x = Fraction(x)
    sign = "-" if x < 0 else ""
    x = abs(x)
    whole, rest = divmod(x.numerator, x.denominator)
    if rest == 0:
        return f"{sign}{whole}"
    out = []
    n = 0
    limit = None if is_terminating(x) else digits
    while rest and (limit is None or n < limit):
        rest *= 10
        dgt, rest = divmod(rest, x.denominator)
        out.append(str(dgt))
        n += 1
    return f"{sign}{whole}." + "".join(out)


def frac_str(x: Fraction) -> str:
    """Lossless text: exact decimal if it terminates, else "num/den"."""
    x = Fraction(x)
    return decimal_str(x) if is_terminating(x) else f"{x.numerator}/{x.denominator}"


def frac_json(x: Fraction):
    x = Fraction(x)
    if is_terminating(x):
        return decimal_str(x)
    return {"dec": decimal_str(x), "frac": f"{x.numerator}/{x.denominator}"}


def frac_from_json(v) -> Fraction:
    return to_fraction(v)


# ---------------------------------------------------------------- powers

def root_bounds(x: Fraction, b: int, slack_bits: int = SLACK_BITS) -> tuple[Fraction, Fraction]:
    """Rational (lo, hi) around x**(1/b) with relative width <= 2**-slack_bits.

    lo == hi exactly when the root is rational.
    """
    x = Fraction(x)
    if x < 0:
        raise ValueError("root of a negative number")
    if x == 0 or b == 1:
        return x, x
    rn, rd = iroot(x.numerator, b), iroot(x.denominator, b)
    if rn ** b == x.numerator and rd ** b == x.denominator:
        v = Fraction(rn, rd)
        return v, v
    # x**(1/b) = (N D^(b-1))**(1/b) / D
    m = x.numerator * x.denominator ** (b - 1)
    s = max(0, slack_bits + 2 - m.bit_length() // b)
    r = iroot(m << (b * s), b)
    den = x.denominator << s
    return Fraction(r, den), Fraction(r + 1, den)


def power_bounds(base: Fraction, exp: Fraction, slack_bits: int = SLACK_BITS) -> tuple[Fraction, Fraction]:
    """Certified (lo, hi) for base**exp with base > 0 and rational exp."""
    base, exp = Fraction(base), Fraction(exp)
    if base <= 0:
        raise ValueError("power_bounds needs a positive base")
    a, b = exp.numerator, exp.denominator
    x = base ** a
    return root_bounds(x, b, slack_bits)


def power_floor(base: Fraction, exp: Fraction) -> int:
    """Exact floor of base**exp for base > 0, exp >= 0 rational."""
    base, exp = Fraction(base), Fraction(exp)
    if exp < 0:
        raise ValueError("power_floor expects a non-negative exponent")
    a, b = exp.numerator, exp.denominator
    return iroot(math.floor(base ** a), b)


def power_le(base: Fraction, exp: Fraction, y: Fraction) -> bool:
    """Exact test base**exp <= y (base > 0)."""
    base, exp, y = Fraction(base), Fraction(exp), Fraction(y)
    if y <= 0:
        return False
    a, b = exp.numerator, exp.denominator
    return base ** a <= y ** b


# ---------------------------------------------------------------- p-adic

def vp(n: int, p: int) -> int:
    """p-adic valuation of a non-zero integer."""
    if n == 0:
        raise ValueError("valuation of zero")
    n = abs(n)
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def padic_abs(x: Fraction, p: int) -> Fraction:
    x = Fraction(x)
    if x == 0:
        return Fraction(0)
    v = vp(x.numerator, p) - vp(x.denominator, p)
    return Fraction(1, p ** v) if v >= 0 else Fraction(p ** (-v))


def padic_residue(x: Fraction, p: int, level: int) -> int:
    """x mod p**level for x in Z_(p) (denominator coprime to p)."""
    x = Fraction(x)
    mod = p ** level
    if x.denominator % p == 0:
        raise ValueError(f"{x} is not a {p}-adic integer")
    return (x.numerator * pow(x.denominator, -1, mod)) % mod if mod > 1 else 0


# ---------------------------------------------------------------- reals

def iv_bounds(v) -> tuple[Fraction, Fraction]:
    lo, hi = v._mpi_
    a, b = to_rational(lo), to_rational(hi)
    return Fraction(int(a[0]), int(a[1])), Fraction(int(b[0]), int(b[1]))


def iv_of(x: Fraction):
    x = Fraction(x)
    return iv.mpf(x.numerator) / iv.mpf(x.denominator)


class CReal:
    """A real number known exactly, as a rational root, or by enclosures.

    ``kind`` is one of "exact" (a Fraction), "root" (base**(1/e)), or
    "interval" (a callable prec -> (lo, hi) with rational endpoints that
    shrink as the precision grows).
    """

    __slots__ = ("kind", "value", "e", "fn")

    def __init__(self, kind: str, value=None, e: int = 1, fn: Callable | None = None):
        self.kind, self.value, self.e, self.fn = kind, value, e, fn

    @classmethod
    def of(cls, x) -> "CReal":
        if isinstance(x, CReal):
            return x
        return cls("exact", Fraction(x))

    @classmethod
    def root(cls, base: Fraction, e: int) -> "CReal":
        base = Fraction(base)
        lo, hi = root_bounds(base, e)
        if lo == hi:
            return cls("exact", lo)
        return cls("root", base, e)

    @classmethod
    def interval(cls, fn: Callable[[int], tuple[Fraction, Fraction]]) -> "CReal":
        return cls("interval", fn=fn)

    @property
    def exact(self) -> Fraction | None:
        return self.value if self.kind == "exact" else None

    def bounds(self, prec: int = 64) -> tuple[Fraction, Fraction]:
        if self.kind == "exact":
            return self.value, self.value
        if self.kind == "root":
            return root_bounds(self.value, self.e, prec)
        return self.fn(prec)

    def scale(self, c: Fraction) -> "CReal":
        """c * self for rational c >= 0."""
        c = Fraction(c)
        if self.kind == "exact":
            return CReal("exact", c * self.value)
        if self.kind == "root":
            return CReal.root(c ** self.e * self.value, self.e)
        fn = self.fn
        return CReal.interval(lambda prec: tuple(c * v for v in fn(prec)))

    def cmp(self, y) -> int:
        """Sign of self - y, decided exactly or by tightening enclosures."""
        y = Fraction(y)
        if self.kind == "exact":
            return (self.value > y) - (self.value < y)
        if self.kind == "root":
            if y < 0:
                return 1
            yb = y ** self.e
            return (self.value > yb) - (self.value < yb)
        prec = 64
        while prec <= MAX_PREC:
            lo, hi = self.fn(prec)
            if lo > y:
                return 1
            if hi < y:
                return -1
            if lo == hi == y:
                return 0
            prec *= 2
        raise IndeterminateComparison(f"could not separate value from {y}")

    def __le__(self, y):
        return self.cmp(y) <= 0

    def __lt__(self, y):
        return self.cmp(y) < 0

    def __ge__(self, y):
        return self.cmp(y) >= 0

    def __gt__(self, y):
        return self.cmp(y) > 0

    def floor(self) -> int:
        if self.kind == "exact":
            return math.floor(self.value)
        if self.kind == "root":
            v = self.value
            return iroot(math.floor(v), self.e) if v >= 0 else -iroot(math.ceil(-v), self.e) - 1
        prec = 64
        while prec <= MAX_PREC:
            lo, hi = self.fn(prec)
            if math.floor(lo) == math.floor(hi):
                return math.floor(lo)
            prec *= 2
        raise IndeterminateComparison("floor undecided")

    def ceil(self) -> int:
        f = self.floor()
        return f if self.cmp(f) == 0 else f + 1

    def __float__(self):
        lo, hi = self.bounds(64)
        return float((lo + hi) / 2)

    def __repr__(self):
        if self.kind == "exact":
            return f"CReal({self.value})"
        if self.kind == "root":
            return f"CReal({self.value}**(1/{self.e}))"
        return f"CReal(~{float(self):.6g})"


def creal_mul(a: CReal, b: CReal) -> CReal:
    """Product of two non-negative certified reals."""
    a, b = CReal.of(a), CReal.of(b)
    if a.kind == "exact":
        return b.scale(a.value)
    if b.kind == "exact":
        return a.scale(b.value)
    if a.kind == "root" and b.kind == "root":
        e = a.e * b.e // math.gcd(a.e, b.e)
        return CReal.root(a.value ** (e // a.e) * b.value ** (e // b.e), e)

    def fn(prec):
        la, ha = a.bounds(prec)
        lb, hb = b.bounds(prec)
        return la * lb, ha * hb
    return CReal.interval(fn)


def creal_inv(a: CReal) -> CReal:
    a = CReal.of(a)
    if a.kind == "exact":
        return CReal.of(1 / a.value)
    if a.kind == "root":
        return CReal.root(1 / a.value, a.e)

    def fn(prec):
        lo, hi = a.bounds(prec)
        if lo <= 0:
            raise IndeterminateComparison("inverse of a value not bounded away from 0")
        return 1 / hi, 1 / lo
    return CReal.interval(fn)


def log_bounds(x: Fraction, prec: int) -> tuple[Fraction, Fraction]:
    """Rigorous enclosure of the natural log of a positive rational."""
    with ivprec(prec):
        return iv_bounds(iv.log(iv_of(x)))


def frange_sum(values: Iterable[Fraction]) -> Fraction:
    total = Fraction(0)
    for v in values:
        total += v
    return total
