"""Independent Diophantine checks: continued fractions, badness scans, pseudo-norms.

Nothing here imports the resonant-family code; the scans recompute the
relevant quantities from scratch so they can serve as an oracle for the
constructions. Points come either as exact rationals or as enclosures
(a midpoint and a radius, or a p-adic digit prefix), and every reported
minimum is a lower bound valid for every point of the enclosure.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .cantor_engine import CantorTree
from .errors import ConfigError, EmptyLevel, MultiplicativeDependence
from .exact import frac_json, frac_str, to_fraction, vp
from .growth import Growth
from .sequences import Seq


@dataclass
class PointEnclosure:
    """A point known to lie within `radius` (sup norm) of `midpoint`.

    For p-adic points `midpoint` holds the residue and `modulus` the prefix
    modulus p^l; the point is congruent to the residue mod p^l.
    """
    midpoint: tuple
    radius: Fraction
    depth: int = 0
    path: list = field(default_factory=list)
    p: int | None = None
    modulus: int | None = None

    @classmethod
    def exact(cls, x) -> "PointEnclosure":
        if isinstance(x, PointEnclosure):
            return x
        if isinstance(x, (list, tuple)):
            return cls(tuple(to_fraction(v) for v in x), Fraction(0))
        return cls((to_fraction(x),), Fraction(0))

    @property
    def is_padic(self) -> bool:
        return self.p is not None

    @property
    def N(self) -> int:
        return len(self.midpoint)

    def contains(self, other: "PointEnclosure") -> bool:
        if self.is_padic:
            return other.modulus % self.modulus == 0 and \
                (int(other.midpoint[0]) - int(self.midpoint[0])) % self.modulus == 0
        return all(abs(a - b) + other.radius <= self.radius for a, b in zip(self.midpoint, other.midpoint))

    def to_json(self) -> dict:
        d = {"midpoint": [frac_json(x) for x in self.midpoint], "radius": frac_json(self.radius),
             "depth": self.depth, "path": list(self.path)}
        if self.is_padic:
            d.update({"p": self.p, "modulus": self.modulus})
        return d


def extract_point(tree: CantorTree, policy: str = "leftmost", seed: int = 0, depth: int | None = None) -> PointEnclosure:
    """Descend from the root through survivors that still have descendants at `depth`."""
    depth = tree.depth if depth is None else depth
    if depth > tree.depth:
        raise ConfigError(f"tree has depth {tree.depth}, asked for {depth}")
    if tree.size(depth) == 0:
        raise EmptyLevel(f"level {depth} of the tree is empty")
    if policy not in ("leftmost", "seeded", "random"):
        raise ConfigError(f"unknown path policy {policy!r}")
    rng = np.random.default_rng(seed)
    i = 0
    path = [0]
    for n in range(depth):
        lo, hi = tree.descendant_range(n, i, n + 1)
        live = [j for j in range(lo, hi) if tree.descendant_range(n + 1, j, depth)[1] >
                tree.descendant_range(n + 1, j, depth)[0]]
        if not live:
            raise EmptyLevel(f"no surviving descendant at level {depth} below level {n}")
        i = live[0] if policy == "leftmost" else live[int(rng.integers(len(live)))]
        path.append(i)
    b = tree.ball(depth, i)
    if tree.structure.is_padic:
        return PointEnclosure((Fraction(b.residues[0]),), b.rad, depth, path, tree.structure.p, b.modulus)
    return PointEnclosure(b.center, b.rad, depth, path)


# ---------------------------------------------------------------- reports

@dataclass
class BadnessReport:
    Q: int
    min_value: Fraction
    argmin: object
    rows: list = field(default_factory=list)     # (q, certified lower bound, determined?)
    kind: str = "bad_constant"
    extra: dict = field(default_factory=dict)

    @property
    def positive(self) -> bool:
        return self.min_value > 0

    @property
    def indeterminate(self) -> int:
        return sum(1 for r in self.rows if not r[2])

    def to_json(self, rows: bool = False) -> dict:
        d = {"kind": self.kind, "Q": self.Q, "min_value": frac_json(self.min_value),
             "min_value_float": float(self.min_value), "argmin": _plain(self.argmin),
             "positive": self.positive, "indeterminate_terms": self.indeterminate}
        d.update({k: _plain(v) for k, v in self.extra.items()})
        if rows:
            d["rows"] = [[_plain(q), frac_json(v), ok] for q, v, ok in self.rows]
        return d

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["q", "value", "certified"])
        for q, v, ok in self.rows:
            w.writerow([_plain(q), frac_str(v), int(ok)])
        return buf.getvalue()


def _plain(x):
    if isinstance(x, Fraction):
        return frac_json(x)
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def _dist_int(x: Fraction) -> Fraction:
    """Distance to the nearest integer."""
    f = x - math.floor(x)
    return min(f, 1 - f)


def _norm_lower(x: PointEnclosure, q: int) -> tuple[Fraction, bool]:
    """Certified lower bound for max_i ||q x_i|| over the enclosure, and whether it is positive."""
    best = Fraction(0)
    det = False
    for mid in x.midpoint:
        d = _dist_int(q * mid) - q * x.radius
        if d > 0:
            det = True
            best = max(best, d)
    if x.radius == 0:
        det = True
    return best, det


def _reduce(rows, Q, kind, extra=None) -> BadnessReport:
    best = None
    arg = None
    for q, v, _ in rows:
        if best is None or v < best:
            best, arg = v, q
    return BadnessReport(Q, best if best is not None else Fraction(0), arg, rows, kind, extra or {})


def bad_constant_scan(x, Q: int, q_min: int = 1) -> BadnessReport:
    """min over q_min <= q <= Q of q ||q x|| (for vectors: q max_i ||q x_i||^N), certified from below.

    A q_min above 1 scans a tail only, which is how the liminf is probed.
    """
    x = PointEnclosure.exact(x)
    if x.is_padic:
        raise ConfigError("use padic_bad_scan for p-adic points")
    N = x.N
    rows = []
    for q in range(max(1, q_min), Q + 1):
        d, ok = _norm_lower(x, q)
        rows.append((q, q * d ** N, ok))
    rep = _reduce(rows, Q, "bad_constant", {"q_min": q_min} if q_min > 1 else None)
    assert q_min > 1 or N > 1 or rep.min_value <= 1, "Dirichlet ceiling violated"
    return rep


def continued_fraction(x, terms: int = 20) -> dict:
    """Partial quotients and convergents; for enclosures, only the quotients shared by both ends."""
    if isinstance(x, PointEnclosure):
        if x.N != 1 or x.is_padic:
            raise ConfigError("continued fractions need a real scalar")
        lo, hi = x.midpoint[0] - x.radius, x.midpoint[0] + x.radius
    else:
        lo = hi = to_fraction(x)
    quotients = []
    determined = True
    a, b = lo, hi
    while len(quotients) < terms:
        qa, qb = math.floor(a), math.floor(b)
        if qa != qb:
            determined = False
            break
        quotients.append(qa)
        fa, fb = a - qa, b - qa
        if fa == 0 or fb == 0:
            if fa != fb:
                determined = False
            break
        a, b = 1 / fb, 1 / fa
    convergents = []
    p0, q0, p1, q1 = 1, 0, 0, 1
    for t in quotients:
        p0, p1 = t * p0 + p1, p0
        q0, q1 = t * q0 + q1, q0
        convergents.append(Fraction(p0, q0))
    complete = lo == hi and bool(convergents) and convergents[-1] == lo
    return {"quotients": quotients, "convergents": convergents, "determined": determined, "complete": complete}


def convergent_scan(x: Fraction, Q: int) -> tuple[Fraction, int]:
    """min of q ||q x|| over convergent denominators q <= Q (for rational x)."""
    cf = continued_fraction(x, 10 ** 6)
    best, arg = None, None
    for c in cf["convergents"]:
        q = c.denominator
        if q > Q:
            break
        v = q * _dist_int(q * x)
        if best is None or v < best:
            best, arg = v, q
    return best, arg


def pseudo_norm(q: int, D) -> Fraction:
    """|q|_D = 1/D_n for the largest n with D_n | q, where D_n = d_1 ... d_n and D_0 = 1."""
    if q == 0:
        return Fraction(0)
    q = abs(int(q))
    d = Seq(D)
    if d.kind == "constant" and d.arg == 1:
        return Fraction(1)
    Dn = 1
    best = 1
    for t in d.terms():
        if t == 1:
            continue
        Dn *= t
        if Dn > q:
            break
        if q % Dn:
            break
        best = Dn
    return Fraction(1, best)


def mad_scan(x, D, g, Q: int) -> BadnessReport:
    """min over q <= Q of q g(q) |q|_D ||q x||, certified."""
    x = PointEnclosure.exact(x)
    g = g if isinstance(g, Growth) else Growth(g)
    rows = []
    for q in range(1, Q + 1):
        d, ok = _norm_lower(x, q)
        glo = g.bounds(q)[0] if g.exact(q) is None else g.exact(q)
        rows.append((q, q * glo * pseudo_norm(q, D) * d, ok))
    return _reduce(rows, Q, "mad", {"D": Seq(D).to_json(), "g": g.text})


def _scaled(x: PointEnclosure, k: int) -> PointEnclosure:
    return PointEnclosure(tuple(k * v for v in x.midpoint), k * x.radius, x.depth)


def lagrange_multiples_scan(x, ks, g, I: int, Q: int) -> dict:
    """For i <= I: g(k_i) * min_{q <= Q} q ||q k_i x||, with the running infimum."""
    x = PointEnclosure.exact(x)
    g = g if isinstance(g, Growth) else Growth(g)
    seq = Seq(ks)
    rows = []
    running = None
    for i, k in enumerate(seq.terms(I), start=1):
        rep = bad_constant_scan(_scaled(x, k), Q)
        gk = g.exact(k)
        glo = gk if gk is not None else g.bounds(k)[0]
        val = glo * rep.min_value
        running = val if running is None else min(running, val)
        rows.append({"i": i, "k": k, "value": val, "argmin": rep.argmin, "running_inf": running,
                     "indeterminate_terms": rep.indeterminate})
    return {"kind": "lagrange_multiples", "Q": Q, "I": I, "rows": rows,
            "min_value": running if running is not None else Fraction(0),
            "positive": running is not None and running > 0}


def _dependent(a: int, b: int) -> bool:
    if a < 2 or b < 2:
        return True
    # a^x = b^y for positive x, y iff log a / log b is rational
    la, lb = a, b
    while la != lb:
        if la < lb:
            la, lb = lb, la
        if la % lb:
            return False
        la //= lb
    return True


def times_ab_scan(x, a: int, b: int, eps, bound: int) -> BadnessReport:
    """min over q = a^s b^t <= bound of g(q) ||q x||, g = (log* q)^(1+eps)."""
    a, b = int(a), int(b)
    if _dependent(a, b):
        raise MultiplicativeDependence(f"{a} and {b} are multiplicatively dependent")
    x = PointEnclosure.exact(x)
    eps = to_fraction(eps)
    e = 1 + eps
    g = Growth(f"logstar(q)**({e.numerator}/{e.denominator})")
    qs = []
    qa = 1
    while qa <= bound:
        qb = qa
        while qb <= bound:
            qs.append(qb)
            qb *= b
        qa *= a
    rows = []
    for q in sorted(qs):
        d, ok = _norm_lower(x, q)
        gq = g.exact(q)
        glo = gq if gq is not None else g.bounds(q)[0]
        rows.append((q, glo * d, ok))
    return _reduce(rows, bound, "times_ab", {"a": a, "b": b, "eps": eps, "terms": len(rows)})


def padic_bad_scan(x: PointEnclosure, H: int, p: int | None = None) -> BadnessReport:
    """min over coprime (r, q), q >= 1, max(|r|, q) <= H of |q x - r|_p max(|r|, q)^2.

    Only the digit prefix x mod p^l is known, so a term whose q x - r vanishes
    mod p^l is bounded below by 0 and flagged indeterminate.
    """
    if not isinstance(x, PointEnclosure) or not x.is_padic:
        if p is None:
            raise ConfigError("a p-adic prefix (PointEnclosure with p) or p is required")
        x = padic_prefix(x, p, 40)
    p, mod = x.p, x.modulus
    a = int(x.midpoint[0]) % mod
    ell = vp(mod, p)
    rows = []
    for q in range(1, H + 1):
        qa = q * a
        for r in range(-H, H + 1):
            if math.gcd(r, q) != 1:
                continue
            Hh = max(abs(r), q)
            t = (qa - r) % mod
            if t == 0:
                rows.append(((r, q), Fraction(0), False))
            else:
                v = vp(t, p)
                rows.append(((r, q), Fraction(Hh * Hh, p ** v), True))
    rep = _reduce(rows, H, "padic_bad", {"p": p, "prefix_digits": ell})
    return rep


def padic_prefix(x, p: int, digits: int) -> PointEnclosure:
    """Prefix enclosure of a p-adic integer given as a rational with p-free denominator."""
    x = to_fraction(x)
    if x.denominator % p == 0:
        raise ConfigError("not a p-adic integer")
    mod = p ** digits
    a = x.numerator * pow(x.denominator, -1, mod) % mod
    return PointEnclosure((Fraction(a),), Fraction(1, mod), digits, [], p, mod)


def padic_sqrt_prefix(c: int, p: int, digits: int, start: int) -> PointEnclosure:
    """Hensel-lifted prefix of a square root of c in Z_p starting from `start` mod p."""
    a = start % p
    if (a * a - c) % p:
        raise ConfigError("start is not a square root mod p")
    mod = p
    for _ in range(1, digits):
        mod *= p
        # Newton step a <- a - (a^2 - c)/(2a)
        a = (a - (a * a - c) * pow(2 * a, -1, mod)) % mod
    return PointEnclosure((Fraction(a),), Fraction(1, mod), digits, [], p, mod)


def golden_enclosure(radius_exp: int = 12) -> PointEnclosure:
    """(sqrt 5 - 1)/2 to within 10^-radius_exp, from integer square roots."""
    scale = 10 ** (radius_exp + 2)
    s = math.isqrt(5 * scale * scale)
    mid = Fraction(s - scale, 2 * scale)
    return PointEnclosure((mid,), Fraction(1, 10 ** radius_exp))
