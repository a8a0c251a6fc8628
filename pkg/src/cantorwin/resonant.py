"""Resonant families, their class decomposition and the bad-to-Cantor pipeline.

A family is an enumerable set of resonant points R_alpha with heights
h(alpha). For a ball B, a scale R and a constant c, class n collects the
members whose neighbourhood radius c*h(alpha) lies in
(diam(B) R^{-n-1}, diam(B) R^{-n}]. Classes are split further into
subclasses C(n, m), and at Cantor step n the subclass C(n, m) is charged to
the level n-m ancestors.

All membership and intersection tests are exact: neighbourhood radii are
rational, rational roots, or certified enclosures (for logarithmic growth),
and comparisons escalate precision until decided.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Sequence

import numpy as np
from mpmath import iv

from .cantor_engine import CantorTree, Oracle, Stage, construct
from .errors import (ConfigError, IndeterminateComparison, MultiplicativeDependence, NoValidC,
                     WindowOverflow)
from .exact import (CReal, MAX_PREC, creal_inv, iroot, iv_bounds, iv_of, padic_residue, power_bounds,
                    to_fraction)
from .growth import Growth
from .sequences import Seq
from .splitting import Ball, SplittingStructure

DEFAULT_CAP = 10 ** 7


@dataclass
class ResonantPoint:
    value: tuple                  # exact rational coordinates
    height: CReal
    meta: dict = field(default_factory=dict)
    n: int = 0
    m: int = 1

    def rho(self, c: Fraction) -> CReal:
        """Neighbourhood radius c*h."""
        return self.height.scale(c)

    @property
    def key(self):
        return self.value


def _compare(fa, fb) -> int:
    """Sign of a - b for two quantities given as prec -> (lo, hi)."""
    prec = 64
    while prec <= MAX_PREC:
        alo, ahi = fa(prec)
        blo, bhi = fb(prec)
        if alo > bhi:
            return 1
        if ahi < blo:
            return -1
        if alo == ahi == blo == bhi:
            return 0
        prec *= 2
    raise IndeterminateComparison("could not separate two certified reals")


def _bounds_fn(x):
    if isinstance(x, CReal):
        return x.bounds
    x = Fraction(x)
    return lambda prec: (x, x)


def creal_cmp(a, b) -> int:
    if isinstance(a, CReal) and a.kind == "exact":
        a = a.value
    if isinstance(b, CReal) and b.kind == "exact":
        b = b.value
    if not isinstance(a, CReal):
        if not isinstance(b, CReal):
            a, b = Fraction(a), Fraction(b)
            return (a > b) - (a < b)
        return -b.cmp(a)
    if not isinstance(b, CReal):
        return a.cmp(b)
    return _compare(_bounds_fn(a), _bounds_fn(b))


def _floor_plus(A: Fraction, X: CReal) -> int:
    """floor(A + X) exactly."""
    if X.kind == "exact":
        return math.floor(A + X.value)
    lo, _ = X.bounds(64)
    f = math.floor(A + lo)
    while X.cmp(f + 1 - A) >= 0:
        f += 1
    while X.cmp(f - A) < 0:
        f -= 1
    return f


def _ceil_minus(A: Fraction, X: CReal) -> int:
    """ceil(A - X) exactly."""
    return -_floor_plus(-A, X)


# ---------------------------------------------------------------- geometry

def _box(B: Ball):
    lo, hi = B.bounds
    return lo, hi


def _windows_from_stage(stage: Stage, max_runs: int = 256):
    """Merged boxes covering the alive candidates (1-d runs, else one bounding box)."""
    t = stage.tree
    s = t.structure
    P = stage.scale
    if s.is_padic:
        return None
    side = 2 * t.origin.radius / P
    lo0 = t.origin.lo()
    cs = stage.coords()
    if len(cs) == 0:
        return []
    if s.N == 1:
        ks = np.unique(cs[:, 0].astype(object) if cs.dtype == object else cs[:, 0])
        ks_list = [int(k) for k in ks.tolist()]
        runs = []
        start = prev = ks_list[0]
        for k in ks_list[1:]:
            if k != prev + 1:
                runs.append((start, prev))
                start = k
            prev = k
        runs.append((start, prev))
        if len(runs) > max_runs:
            # coalesce by closing the smallest gaps
            gaps = sorted(range(len(runs) - 1), key=lambda i: runs[i + 1][0] - runs[i][1])
            cut = set(gaps[len(runs) - max_runs:])
            merged = []
            cur = runs[0]
            for i in range(len(runs) - 1):
                if i in cut:
                    merged.append(cur)
                    cur = runs[i + 1]
                else:
                    cur = (cur[0], runs[i + 1][1])
            merged.append(cur)
            runs = merged
        return [((lo0[0] + a * side,), (lo0[0] + (b + 1) * side,)) for a, b in runs]
    mins = [min(int(x) for x in cs[:, d].tolist()) for d in range(s.N)]
    maxs = [max(int(x) for x in cs[:, d].tolist()) for d in range(s.N)]
    return [(tuple(lo0[d] + mins[d] * side for d in range(s.N)),
             tuple(lo0[d] + (maxs[d] + 1) * side for d in range(s.N)))]


def _prange(den: int, lo: Fraction, hi: Fraction, slack: Fraction) -> range:
    return range(math.ceil((lo - slack) * den), math.floor((hi + slack) * den) + 1)


def meets_box(pt: ResonantPoint, c: Fraction, lo: Sequence, hi: Sequence) -> bool:
    """Closed neighbourhood of pt (sup norm) meets the closed box [lo, hi]."""
    gap = Fraction(0)
    for v, a, b in zip(pt.value, lo, hi):
        if v < a:
            gap = max(gap, a - v)
        elif v > b:
            gap = max(gap, v - b)
    if gap == 0:
        return True
    return pt.rho(c).cmp(gap) >= 0


def meets_padic(pt: ResonantPoint, c: Fraction, p: int, residue: int, level: int) -> bool:
    """|residue - x|_p <= max(rho, p^-level) for the level-`level` ball around residue."""
    x = pt.value[0]
    mod = p ** level
    if padic_residue(x, p, level) == residue % mod:
        return True
    # distance is p^-v with v < level; meets iff rho >= p^-v
    diff = Fraction(residue) - x
    v = 0
    num = diff.numerator
    while num % p == 0:
        num //= p
        v += 1
    return pt.rho(c).cmp(Fraction(1, p ** v)) >= 0


# ---------------------------------------------------------------- families

class Family:
    name = "family"
    padic = False
    N = 1

    def height_of(self, value, meta) -> CReal:
        raise NotImplementedError

    def choose_c(self, B: Ball, R: int, depth: int = 10) -> tuple[Fraction, dict]:
        raise NotImplementedError

    def enumerate_class(self, B: Ball, R: int, c: Fraction, n: int, windows=None,
                        cap: int = DEFAULT_CAP) -> list[ResonantPoint]:
        raise NotImplementedError

    def subclass_of(self, pt: ResonantPoint, n: int, R: int) -> int:
        return 1

    def subclasses(self, n: int, R: int) -> set | None:
        """Possible subclass indices at step n (None: any of 1..n)."""
        return {1}

    def to_json(self) -> dict:
        raise NotImplementedError

    def fits_ball(self, B: Ball, R: int, c: Fraction, hmax) -> bool:
        """sup c*h <= diam(B)/R."""
        return creal_cmp(CReal.of(hmax).scale(c) if not isinstance(hmax, CReal) else hmax.scale(c),
                         B.diam / R) <= 0

    def _assign(self, pts, n, R):
        for p in pts:
            p.n = n
            p.m = self.subclass_of(p, n, R)
        return pts


def _class_window(B: Ball, R: int, c: Fraction, n: int):
    """c*h must lie in (D R^{-n-1}, D R^{-n}]."""
    D = B.diam
    return D / Fraction(R) ** (n + 1), D / Fraction(R) ** n


class ClassicalBad(Family):
    """Points p/q (gcd(p_1..p_N, q) = 1) with h = q^{-1-1/N}."""
    name = "classical_bad"

    def __init__(self, N: int = 1):
        if N < 1:
            raise ConfigError("N must be positive")
        self.N = N

    def height_of(self, value, meta) -> CReal:
        q = meta["q"]
        return CReal.root(Fraction(1, q ** (self.N + 1)), self.N)

    def choose_c(self, B, R, depth=10):
        N = self.N
        nf = math.factorial(N)
        r = iroot(nf, N)
        ceil_root = r if r ** N == nf else r + 1
        c = Fraction(1, ceil_root * 3 * R * R + 1)
        ok = self.fits_ball(B, R, c, Fraction(1))
        if not ok:
            raise NoValidC(f"c = {c} violates sup c*h <= diam(B)/R (binding: neighbourhood size)")
        return c, {"c": c, "rule": "1/(ceil(N!^(1/N)) 3 R^2 + 1)", "fits_ball": ok}

    def q_range(self, B, R, c, n) -> range:
        N = self.N
        D = B.diam
        x_lo = (c / D) ** N * Fraction(R) ** (N * n)
        x_hi = (c / D) ** N * Fraction(R) ** (N * (n + 1))
        e = N + 1
        q0 = max(1, iroot(math.floor(x_lo), e))
        while Fraction(q0) ** e < x_lo:
            q0 += 1
        q1 = iroot(math.ceil(x_hi), e) + 1
        while q1 >= 1 and Fraction(q1) ** e >= x_hi:
            q1 -= 1
        return range(q0, q1 + 1)

    def enumerate_class(self, B, R, c, n, windows=None, cap=DEFAULT_CAP):
        if n < 1:
            return []
        N = self.N
        lo_w, hi_w = _class_window(B, R, c, n)
        if windows is None:
            windows = [_box(B)]
        qs = self.q_range(B, R, c, n)
        total = 0
        for q in qs:
            for lo, hi in windows:
                k = 1
                for a, b in zip(lo, hi):
                    k *= max(0, len(_prange(q, a, b, hi_w)))
                total += k
            if total > cap:
                raise WindowOverflow(f"class {n} needs more than {cap} candidate parameters")
        out = []
        seen = set()
        for q in qs:
            h = CReal.root(Fraction(1, q ** (N + 1)), N)
            for lo, hi in windows:
                ranges = [_prange(q, a, b, hi_w) for a, b in zip(lo, hi)]
                for ps in product(*ranges):
                    if math.gcd(q, *ps) != 1:
                        continue
                    val = tuple(Fraction(p, q) for p in ps)
                    if val in seen:
                        continue
                    pt = ResonantPoint(val, h, {"p": ps if N > 1 else ps[0], "q": q})
                    if meets_box(pt, c, lo, hi):
                        seen.add(val)
                        out.append(pt)
        return self._assign(out, n, R)

    def to_json(self):
        return {"family": self.name, "N": self.N}


class LagrangeMultiples(Family):
    """Points p/(k_i q), gcd(p, q) = 1, h = 1/(g(k_i) k_i q^2); subclass m = i."""
    name = "lagrange"

    def __init__(self, g="q", k=None, shift: int = 0):
        self.g = g if isinstance(g, Growth) else Growth(g)
        self.k = Seq(k if k is not None else {"geometric": 10})
        self.shift = int(shift)
        if self.shift < 0:
            raise ConfigError("shift must be non-negative")

    def k_at(self, i: int) -> int:
        return self.k[i + self.shift]

    def terms(self, limit=None):
        i = 1
        while limit is None or i <= limit:
            try:
                yield i, self.k_at(i)
            except IndexError:
                return
            i += 1

    def growth_check(self, R: int, upto: int = 12) -> dict:
        """Whether g(k_i) >= R^{i-1} for the first terms (a configuration warning, not an error)."""
        bad = []
        for i, k in self.terms(upto):
            if self.g(k).cmp(Fraction(R) ** (i - 1)) < 0:
                bad.append(i)
        return {"pass": not bad, "failing_indices": bad}

    def height_of(self, value, meta) -> CReal:
        k, q = meta["k"], meta["q"]
        return creal_inv(self.g(k)).scale(Fraction(1, k * q * q))

    def choose_c(self, B, R, depth=10):
        c = Fraction(1, R * R)
        first = next(self.terms(1), None)
        if first is None:
            return c, {"c": c, "rule": "R^-2", "fits_ball": True, "growth": {"pass": True}}
        i, k = first
        hmax = creal_inv(self.g(k)).scale(Fraction(1, k))
        ok = self.fits_ball(B, R, c, hmax)
        if not ok:
            raise NoValidC("c = R^-2 violates sup c*h <= diam(B)/R")
        return c, {"c": c, "rule": "R^-2", "fits_ball": ok, "growth": self.growth_check(R)}

    def enumerate_class(self, B, R, c, n, windows=None, cap=DEFAULT_CAP):
        if n < 1:
            return []
        D = B.diam
        x_lo = c / D * Fraction(R) ** n
        x_hi = c / D * Fraction(R) ** (n + 1)
        _, hi_w = _class_window(B, R, c, n)
        if windows is None:
            windows = [_box(B)]
        out = []
        budget = 0
        for i, k in self.terms():
            G = self.g(k)
            if G.cmp(x_hi / k) >= 0:
                # g(k_i) k_i alone already reaches the top of the window
                if self.k.finite:
                    continue
                break
            glo, ghi = G.bounds(64)
            if ghi <= 0:
                continue
            q = max(1, math.isqrt(max(0, math.floor(x_lo / (k * ghi)))))
            while G.cmp(x_lo / (k * q * q)) < 0:
                q += 1
            qs = []
            while G.cmp(x_hi / (k * q * q)) < 0:
                qs.append(q)
                q += 1
            hq = creal_inv(G)
            for q in qs:
                den = k * q
                for lo, hi in windows:
                    rng = _prange(den, lo[0], hi[0], hi_w)
                    budget += len(rng)
                    if budget > cap:
                        raise WindowOverflow(f"class {n} needs more than {cap} candidate parameters")
                    h = hq.scale(Fraction(1, k * q * q))
                    for p in rng:
                        if math.gcd(p, q) != 1:
                            continue
                        pt = ResonantPoint((Fraction(p, den),), h, {"i": i, "p": p, "q": q, "k": k})
                        if meets_box(pt, c, lo, hi):
                            out.append(pt)
        return self._assign(out, n, R)

    def subclass_of(self, pt, n, R):
        return pt.meta["i"]

    def subclasses(self, n, R):
        return None

    def to_json(self):
        return {"family": self.name, "g": self.g.text, "k": self.k.to_json(), "shift": self.shift}


class MixedLittlewood(LagrangeMultiples):
    """mad_D(g) through multipliers k_i = D_i = d_1 ... d_i."""
    name = "mad"

    def __init__(self, d=None, g="logstar(q)", shift: int = 0):
        self.d = Seq(d if d is not None else {"geometric": 10})
        super().__init__(g, {"products": self.d.to_json()}, shift)

    def to_json(self):
        return {"family": self.name, "g": self.g.text, "d": self.d.to_json(), "shift": self.shift}


def _prime_exponents(n: int) -> dict:
    out = {}
    d = 2
    while d * d <= n:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def multiplicatively_dependent(a: int, b: int) -> bool:
    """True iff a^x = b^y for some positive integers x, y."""
    if a < 2 or b < 2:
        return True
    ea, eb = _prime_exponents(a), _prime_exponents(b)
    if set(ea) != set(eb):
        return False
    ratios = {Fraction(ea[p], eb[p]) for p in ea}
    return len(ratios) == 1


class TimesAB(Family):
    """Points p/q with q in Sigma = {a^s b^t}, h = 1/(q g(q)), g = (log* q)^(1+eps)."""
    name = "times_ab"

    def __init__(self, a: int = 2, b: int = 3, eps=1, cap: int = 10 ** 12):
        self.a, self.b = int(a), int(b)
        if multiplicatively_dependent(self.a, self.b):
            raise MultiplicativeDependence(f"{self.a} and {self.b} are multiplicatively dependent")
        self.eps = to_fraction(eps)
        if self.eps <= 0:
            raise ConfigError("epsilon must be positive")
        e = 1 + self.eps
        self.g = Growth(f"logstar(q)**({e.numerator}/{e.denominator})")
        self.scan_cap = cap
        self._c12 = None

    def sigma(self, upto) -> list[tuple[int, int, int]]:
        """(q, s, t) for q = a^s b^t <= upto, sorted by q."""
        out = []
        s = 0
        qa = 1
        while qa <= upto:
            qb = qa
            t = 0
            while qb <= upto:
                out.append((qb, s, t))
                qb *= self.b
                t += 1
            qa *= self.a
            s += 1
        out.sort()
        return out

    def in_sigma(self, q: int) -> bool:
        for base in (self.a,):
            while q % base == 0:
                q //= base
        while q % self.b == 0:
            q //= self.b
        return q == 1

    def qg(self, q: int) -> CReal:
        return self.g(q).scale(q)

    def height_of(self, value, meta):
        return creal_inv(self.qg(meta["q"]))

    def c1_c2(self) -> tuple[Fraction, Fraction]:
        """Certified min/max of 1/r(q) = g(q g(q)) / g(q) over the scanned part of Sigma."""
        if self._c12 is not None:
            return self._c12
        lo_min = None
        hi_max = None
        for q, _, _ in self.sigma(self.scan_cap):
            gq_lo, gq_hi = self.g.bounds(q, 96)
            inner_lo, inner_hi = q * gq_lo, q * gq_hi
            outer_lo = self.g.bounds(inner_lo, 96)[0]
            outer_hi = self.g.bounds(inner_hi, 96)[1]
            r_lo, r_hi = outer_lo / gq_hi, outer_hi / gq_lo
            lo_min = r_lo if lo_min is None else min(lo_min, r_lo)
            hi_max = r_hi if hi_max is None else max(hi_max, r_hi)
        floor_hi = power_bounds(2, 1 + self.eps)[1]
        c1 = min(lo_min, Fraction(1))
        c2 = max(hi_max, floor_hi)
        # keep the numbers short: round outward to 1/2^32
        c1 = Fraction(math.floor(c1 * 2 ** 32), 2 ** 32)
        c2 = Fraction(math.ceil(c2 * 2 ** 32), 2 ** 32)
        self._c12 = (c1, c2)
        return self._c12

    def k_factor(self, R: int) -> tuple[Fraction, Fraction]:
        """Bounds of k = R^{2 eps}."""
        return power_bounds(Fraction(R), 2 * self.eps)

    def m0(self, n: int, R: int) -> int:
        """Minimal m >= 1 with R^m >= R k g(R^n)."""
        gR = self.g(Fraction(R) ** n)
        m = 1
        while True:
            # R^{m-1-2eps} >= g(R^n)
            e = m - 1 - 2 * self.eps
            lhs = (lambda prec, e=e: power_bounds(Fraction(R), e, prec) if e >= 0 else
                   tuple(1 / x for x in reversed(power_bounds(Fraction(R), -e, prec))))
            if _compare(lhs, gR.bounds) >= 0:
                return m
            m += 1

    def n0(self, R: int, horizon: int = 60) -> int:
        """Minimal n with m0(n') <= n' for every n' in [n, horizon]."""
        n0 = horizon + 1
        for n in range(horizon, 0, -1):
            if self.m0(n, R) <= n:
                n0 = n
            else:
                break
        return n0

    def cstar_bounds(self, c: Fraction, R: int, n: int):
        """Rational (lo, hi) so that C*(n) = {q : lo_exact <= q < hi_exact}; returns CReals."""
        c1, c2 = self.c1_c2()
        X0 = c * Fraction(R) ** n
        X1 = c * Fraction(R) ** (n + 1)
        lo = creal_inv(self.g(X0)).scale(c1 * X0)
        hi = creal_inv(self.g(X1)).scale(c2 * X1)
        return lo, hi

    def spacing_bound(self, c: Fraction, R: int, n: int) -> CReal:
        """g(c R^{n+1}) / (c2 c R^{n+1})."""
        _, c2 = self.c1_c2()
        X1 = c * Fraction(R) ** (n + 1)
        return self.g(X1).scale(1 / (c2 * X1))

    def constraints(self, c: Fraction, R: int, n: int, n0: int) -> dict:
        """The three smallness constraints on c at step n."""
        out = {}
        _, hi = self.cstar_bounds(c, R, n)
        # (i) largest s with a^s < hi must satisfy a^{s+1} <= R^n
        s = 0
        while hi.cmp(self.a ** (s + 1)) > 0:
            s += 1
        out["s_range"] = self.a ** (s + 1) <= Fraction(R) ** n
        # (ii) spacing at least k g(R^n) R^{-n}
        klo, khi = self.k_factor(R)
        sp = self.spacing_bound(c, R, n)
        gRn = self.g(Fraction(R) ** n)
        rhs = (lambda prec: (klo * gRn.bounds(prec)[0] / Fraction(R) ** n,
                             khi * gRn.bounds(prec)[1] / Fraction(R) ** n))
        out["spacing"] = _compare(sp.bounds, rhs) >= 0
        # (iii) classes below n0 are empty: c R^{n0} <= min q g(q) = 1
        out["empty_below_n0"] = c * Fraction(R) ** n0 <= 1
        return out

    def choose_c(self, B, R, depth=10, max_j: int = 200):
        D = B.diam
        n0 = self.n0(R, max(60, depth + 10))
        horizon = max(depth, n0) + 10
        binding = None
        for j in range(1, max_j + 1):
            c = Fraction(1, R ** j) * D
            if not self.fits_ball(B, R, c, Fraction(1)):
                binding = "neighbourhood size"
                continue
            cc = c / D
            failed = None
            for n in range(n0, horizon + 1):
                con = self.constraints(cc, R, n, n0)
                bad = [k for k, v in con.items() if not v]
                if bad:
                    failed = (bad[0], n)
                    break
            if failed is None:
                return c, {"c": c, "j": j, "n0": n0, "binding": binding,
                           "c1": self.c1_c2()[0], "c2": self.c1_c2()[1], "checked_upto": horizon}
            binding = f"{failed[0]} at n={failed[1]}"
        raise NoValidC(f"no c = R^-j with j <= {max_j} works (binding: {binding})")

    def class_q(self, B, R, c, n) -> list[int]:
        D = B.diam
        x_lo = c / D * Fraction(R) ** n
        x_hi = c / D * Fraction(R) ** (n + 1)
        out = []
        for q, s, t in self.sigma(math.floor(x_hi) + 1):
            v = self.qg(q)
            if v.cmp(x_lo) >= 0 and v.cmp(x_hi) < 0:
                out.append(q)
        return out

    def enumerate_class(self, B, R, c, n, windows=None, cap=DEFAULT_CAP):
        if n < 1:
            return []
        _, hi_w = _class_window(B, R, c, n)
        if windows is None:
            windows = [_box(B)]
        out = []
        budget = 0
        for q in self.class_q(B, R, c, n):
            h = self.height_of(None, {"q": q})
            for lo, hi in windows:
                rng = _prange(q, lo[0], hi[0], hi_w)
                budget += len(rng)
                if budget > cap:
                    raise WindowOverflow(f"class {n} needs more than {cap} candidate parameters")
                for p in rng:
                    g = math.gcd(p, q)
                    if g > 1 and self.in_sigma(q // g):
                        continue   # the reduced fraction is itself a member with a larger neighbourhood
                    pt = ResonantPoint((Fraction(p, q),), h, {"p": p, "q": q})
                    if meets_box(pt, c, lo, hi):
                        out.append(pt)
        return self._assign(out, n, R)

    def subclass_of(self, pt, n, R):
        return self.m0(n, R)

    def subclasses(self, n, R):
        return {self.m0(n, R)}

    def cstar_classes(self, B, R, c, n) -> dict:
        """C*(n, s): s -> sorted distinct values p/(a^s b^t) in B, for q in the C*(n) window."""
        lo, hi = self.cstar_bounds(c / B.diam, R, n)
        (blo,), (bhi,) = _box(B)
        groups: dict = {}
        top = math.ceil(hi.bounds(64)[1]) + 1
        for q, s, t in self.sigma(top):
            if lo.cmp(q) > 0 or hi.cmp(q) <= 0:
                continue
            vals = groups.setdefault(s, set())
            for p in range(math.ceil(blo * q), math.floor(bhi * q) + 1):
                vals.add(Fraction(p, q))
        return {s: sorted(v) for s, v in groups.items()}

    def spacing_check(self, B, R, c, n) -> dict:
        bound = self.spacing_bound(c / B.diam, R, n)
        worst = None
        ok = True
        groups = self.cstar_classes(B, R, c, n)
        for s, vals in groups.items():
            for x, y in zip(vals, vals[1:]):
                d = y - x
                if bound.cmp(d) > 0:
                    ok = False
                if worst is None or d < worst[1]:
                    worst = (s, d)
        return {"pass": ok, "n": n, "bound": bound, "bound_float": float(bound), "classes": len(groups),
                "members": sum(len(v) for v in groups.values()),
                "min_gap": None if worst is None else worst[1], "min_gap_s": None if worst is None else worst[0]}

    def count_constant(self, R: int) -> float:
        e = float(self.eps)
        k = float(R) ** (2 * e)
        return 2 * (R * R * k) ** (e / (1 + e)) / (k * math.log(self.a))

    def to_json(self):
        return {"family": self.name, "a": self.a, "b": self.b, "eps": str(self.eps)}


class PadicBad(Family):
    """Rationals r/q in Z_p (p does not divide q), h = max(|r|, q)^-2."""
    name = "padic_bad"
    padic = True

    def __init__(self, p: int = 5, c1=1, N: int = 1):
        if N != 1:
            raise ConfigError("the p-adic family is implemented for N = 1")
        self.p = int(p)
        self.c1 = to_fraction(c1)
        self.N = 1

    def height_of(self, value, meta):
        H = meta["H"]
        return CReal.of(Fraction(1, H * H))

    def choose_c(self, B, R, depth=10):
        c1_cap = self.c1 / math.factorial(self.N + 1) / Fraction(R) ** 2
        rc = B.diam / R
        c = min(c1_cap, rc)
        return c, {"c": c, "rule": "min(c1/(N+1)! R^-2, diam/R)", "binding": "c1" if c1_cap <= rc else "diameter"}

    def H_range(self, B, R, c, n) -> range:
        D = B.diam
        x_lo = c / D * Fraction(R) ** n
        x_hi = c / D * Fraction(R) ** (n + 1)
        h0 = max(1, math.isqrt(math.floor(x_lo)))
        while h0 * h0 < x_lo:
            h0 += 1
        h1 = math.isqrt(math.ceil(x_hi)) + 1
        while h1 >= 1 and h1 * h1 >= x_hi:
            h1 -= 1
        return range(h0, h1 + 1)

    def enumerate_class(self, B, R, c, n, windows=None, cap=DEFAULT_CAP):
        if n < 1:
            return []
        p = self.p
        Hs = self.H_range(B, R, c, n)
        if sum(4 * H + 2 for H in Hs) > cap:
            raise WindowOverflow(f"class {n} needs more than {cap} candidate parameters")
        out = []
        mod = B.modulus
        res = B.residues[0]
        for H in Hs:
            pairs = set()
            if H % p:
                for r in range(-H, H + 1):
                    pairs.add((r, H))
            for q in range(1, H):
                if q % p:
                    pairs.add((H, q))
                    pairs.add((-H, q))
            for r, q in sorted(pairs, key=lambda rq: (rq[1], rq[0])):
                if math.gcd(r, q) != 1:
                    continue
                x = Fraction(r, q)
                if mod > 1 and padic_residue(x, p, 0) == 0 and \
                        (r * pow(q, -1, mod)) % mod != res:
                    continue
                out.append(ResonantPoint((x,), CReal.of(Fraction(1, H * H)), {"r": r, "q": q, "H": H}))
        return self._assign(out, n, R)

    def to_json(self):
        return {"family": self.name, "p": self.p, "c1": str(self.c1)}


class ExplicitPoints(Family):
    """A finite family given by explicit rational points and heights (for probes and tests)."""
    name = "points"

    def __init__(self, points, heights, subclass: int = 1):
        self.points = [tuple(to_fraction(x) for x in (p if isinstance(p, (list, tuple)) else [p]))
                       for p in points]
        self.heights = [to_fraction(h) for h in heights]
        if len(self.points) != len(self.heights):
            raise ConfigError("points and heights differ in length")
        self.N = len(self.points[0]) if self.points else 1
        self.sub = subclass

    def height_of(self, value, meta):
        return CReal.of(self.heights[meta["index"]])

    def choose_c(self, B, R, depth=10):
        hmax = max(self.heights, default=Fraction(1))
        c = B.diam / R / hmax if hmax else Fraction(1)
        return c, {"c": c, "rule": "diam/(R max h)"}

    def enumerate_class(self, B, R, c, n, windows=None, cap=DEFAULT_CAP):
        lo_w, hi_w = _class_window(B, R, c, n)
        out = []
        lo, hi = _box(B)
        for i, (v, h) in enumerate(zip(self.points, self.heights)):
            if lo_w < c * h <= hi_w:
                pt = ResonantPoint(v, CReal.of(h), {"index": i})
                if meets_box(pt, c, lo, hi):
                    out.append(pt)
        return self._assign(out, n, R)

    def subclass_of(self, pt, n, R):
        return min(self.sub, n)

    def subclasses(self, n, R):
        return {min(self.sub, n)}

    def to_json(self):
        from .exact import frac_json
        return {"family": self.name, "points": [[frac_json(x) for x in p] for p in self.points],
                "heights": [frac_json(h) for h in self.heights], "subclass": self.sub}


_FAMILY_ALIASES = {
    "classical_bad": "classical_bad", "classical-bad": "classical_bad", "bad": "classical_bad",
    "lagrange": "lagrange", "lagrange_multiples": "lagrange", "lagrange-multiples": "lagrange",
    "mad": "mad", "times_ab": "times_ab", "timesab": "times_ab", "times-ab": "times_ab",
    "padic_bad": "padic_bad", "padic": "padic_bad", "padic-bad": "padic_bad", "points": "points",
}


def family_from_json(d: dict) -> Family:
    if not isinstance(d, dict) or "family" not in d:
        raise ConfigError("family descriptor must be an object with a 'family' field")
    kind = _FAMILY_ALIASES.get(str(d["family"]).lower())
    if kind is None:
        raise ConfigError(f"unknown family {d['family']!r}")
    if kind == "classical_bad":
        return ClassicalBad(int(d.get("N", 1)))
    if kind == "lagrange":
        return LagrangeMultiples(d.get("g", "q"), d.get("k", {"geometric": 10}), int(d.get("shift", 0)))
    if kind == "mad":
        return MixedLittlewood(d.get("d", {"geometric": 10}), d.get("g", "logstar(q)"), int(d.get("shift", 0)))
    if kind == "times_ab":
        return TimesAB(int(d.get("a", 2)), int(d.get("b", 3)), d.get("eps", 1))
    if kind == "padic_bad":
        return PadicBad(int(d.get("p", 5)), d.get("c1", 1))
    return ExplicitPoints(d.get("points", []), d.get("heights", []), int(d.get("subclass", 1)))


# ---------------------------------------------------------------- operations

def choose_c(family: Family, B: Ball, R: int, depth: int = 10) -> tuple[Fraction, dict]:
    return family.choose_c(B, R, depth)


def enumerate_class(family: Family, B: Ball, R: int, c, n: int, windows=None,
                    cap: int = DEFAULT_CAP) -> list[ResonantPoint]:
    return family.enumerate_class(B, R, to_fraction(c), n, windows, cap)


def subclass_of(family: Family, point: ResonantPoint, n: int, R: int) -> int:
    return family.subclass_of(point, n, R)


def cells_met(pt: ResonantPoint, c: Fraction, tree_or_stage_info, level: int):
    """Grid coordinates (per axis ranges, or p-adic residues) of level balls meeting pt's neighbourhood."""
    structure, origin, P = tree_or_stage_info
    if structure.is_padic:
        p = structure.p
        ell = origin.level + _log_p(P, p)
        rho = pt.rho(c)
        j = ell
        # neighbourhood {|x - v| <= rho} is the ball of radius p^-j with j minimal such that p^-j <= rho
        while j > origin.level and rho.cmp(Fraction(1, p ** (j - 1))) >= 0:
            j -= 1
        mod0 = p ** origin.level
        base = padic_residue(pt.value[0], p, j)
        # all residues a mod p^ell with a = base mod p^j, mapped to coordinates
        out = []
        step = p ** j
        for t in range(p ** (ell - j)):
            a = base + t * step
            if (a - origin.residues[0]) % mod0:
                continue
            out.append(((a - origin.residues[0]) // mod0) % P)
        return [out]
    side = 2 * origin.radius / P
    lo0 = origin.lo()
    rho_side = pt.rho(c).scale(1 / side)
    ranges = []
    for v, l in zip(pt.value, lo0):
        A = (v - l) / side
        kmax = min(_floor_plus(A, rho_side), P - 1)
        kmin = max(_ceil_minus(A, rho_side) - 1, 0)
        if kmin > kmax:
            return None
        ranges.append(range(kmin, kmax + 1))
    return ranges


def _log_p(P: int, p: int) -> int:
    e = 0
    while P > 1:
        P //= p
        e += 1
    return e


class BadOracle(Oracle):
    """Removes every candidate meeting a neighbourhood of the stage's subclass."""
    name = "bad_to_cantor"

    def __init__(self, family: Family, c: Fraction, R: int, B: Ball, cap: int = DEFAULT_CAP):
        self.family = family
        self.c = c
        self.R = R
        self.B = B
        self.cap = cap
        self.classes: dict = {}
        self.processed: dict = {}

    def members(self, n_step: int, stage: Stage) -> list[ResonantPoint]:
        if n_step not in self.classes:
            windows = _windows_from_stage(stage)
            self.classes[n_step] = self.family.enumerate_class(self.B, self.R, self.c, n_step, windows, self.cap)
            self.processed[n_step] = len(self.classes[n_step])
        return self.classes[n_step]

    def wants(self, n, m):
        subs = self.family.subclasses(n + 1, self.R)
        return subs is None or (n + 1 - m) in subs

    def select(self, stage: Stage) -> np.ndarray:
        n_step = stage.n + 1
        m_sub = n_step - stage.m
        pts = [p for p in self.members(n_step, stage) if p.m == m_sub]
        if not pts or len(stage.codes) == 0:
            return np.zeros(0, dtype=np.int64)
        t = stage.tree
        s = t.structure
        P = stage.scale
        info = (s, t.origin, P)
        codes = stage.codes
        order = np.argsort(codes, kind="stable")
        sorted_codes = codes[order]
        wanted = []
        for pt in pts:
            rngs = cells_met(pt, self.c, info, n_step)
            if rngs is None:
                continue
            for cell in product(*rngs):
                flat = 0
                for k in cell:
                    flat = flat * P + int(k)
                wanted.append(flat)
        if not wanted:
            return np.zeros(0, dtype=np.int64)
        arr = np.asarray(sorted(set(wanted)), dtype=codes.dtype)
        pos = np.searchsorted(sorted_codes, arr)
        pos_ok = pos < len(sorted_codes)
        hit = np.zeros(len(arr), dtype=bool)
        hit[pos_ok] = sorted_codes[pos[pos_ok]] == arr[pos_ok]
        return np.sort(order[pos[hit]])


def bad_to_cantor(family: Family, B: Ball, R: int, depth: int, c=None, expand=None,
                  cap: int = DEFAULT_CAP) -> CantorTree:
    """Run the bad-to-Cantor construction; budgets are the observed counts."""
    if c is None:
        c, report = family.choose_c(B, R, depth)
    else:
        c = to_fraction(c)
        report = {"c": c, "rule": "given"}
    if B.structure.is_padic != family.padic:
        raise ConfigError("family and structure disagree on the space (real vs p-adic)")
    oracle = BadOracle(family, c, R, B, cap)
    root = Ball.root(B.structure, B.origin)
    tree = construct(root, R, None, oracle, depth, expand=expand,
                     meta={"family": family.to_json(), "c": c, "R": R, "choose_c": report})
    tree.meta["class_sizes"] = dict(sorted(oracle.processed.items()))
    tree.meta["processed_classes"] = sorted(oracle.processed)
    return tree


# ---------------------------------------------------------------- counting

def _pack_1d(intervals, lo: Fraction, hi: Fraction, L: Fraction) -> int:
    """Max number of interior-disjoint length-L subintervals of [lo, hi] each meeting a given interval."""
    ivs = sorted((max(a, lo), min(b, hi)) for a, b in intervals if b >= lo and a <= hi)
    if not ivs:
        return 0
    count = 0
    cur = lo
    while True:
        best = None
        for a, b in ivs:
            if b < cur:
                continue
            x = max(cur, a - L)
            if x <= b and (best is None or x < best):
                best = x
        if best is None or best + L > hi:
            return count
        count += 1
        cur = best + L


def _rho_upper(pt, c) -> Fraction:
    r = pt.rho(c)
    return r.exact if r.exact is not None else r.bounds(64)[1]


def q_estimate(family: Family, B: Ball, R: int, c, n: int, m: int, mode: str = "qtilde",
               balls=None, cap: int = DEFAULT_CAP) -> dict:
    """Max over test balls of radius rad(B) R^{m-n} of the counting quantity.

    ``mode="qtilde"`` counts members of C(n, m) whose neighbourhood meets the
    ball. ``mode="q"`` counts the largest family of boundary-disjoint
    sub-balls of radius rad(B) R^{-n} inside the ball that each meet a
    neighbourhood (exact greedy in dimension one, grid count otherwise).
    Test balls default to every grid ball at level n-m near a member plus
    the half-shifted ones.
    """
    c = to_fraction(c)
    if m > n or m < 1:
        return {"max": 0, "n": n, "m": m, "balls": 0, "members": 0}
    pts = [p for p in family.enumerate_class(B, R, c, n, None, cap) if p.m == m]
    s = B.structure
    if not pts:
        return {"max": 0, "n": n, "m": m, "balls": 0, "members": 0}
    if s.is_padic:
        return _q_estimate_padic(pts, B, R, c, n, m, mode)
    N = s.N
    lo0, hi0 = _box(B)
    D = B.diam
    side_b = D * Fraction(R) ** (m - n)        # test-ball side
    L = D * Fraction(R) ** (-n)                # sub-ball side
    if balls is None:
        starts = set()
        for pt in pts:
            rho = _rho_upper(pt, c)
            per_axis = []
            for v, l in zip(pt.value, lo0):
                k0 = math.floor((v - rho - l) / side_b) - 1
                k1 = math.floor((v + rho - l) / side_b) + 1
                ks = set()
                for k in range(k0, k1 + 1):
                    ks.add(Fraction(k))
                    ks.add(Fraction(2 * k + 1, 2))
                per_axis.append(ks)
            for combo in product(*per_axis):
                starts.add(tuple(l + k * side_b for l, k in zip(lo0, combo)))
        balls = [(st, tuple(x + side_b for x in st)) for st in sorted(starts)]
    best = 0
    best_ball = None
    by_axis0 = sorted(pts, key=lambda p: p.value[0])
    keys = [p.value[0] for p in by_axis0]
    import bisect
    rmax = max(_rho_upper(p, c) for p in pts)
    for lo, hi in balls:
        i0 = bisect.bisect_left(keys, lo[0] - rmax)
        i1 = bisect.bisect_right(keys, hi[0] + rmax)
        near = [p for p in by_axis0[i0:i1] if meets_box(p, c, lo, hi)]
        if mode == "qtilde":
            val = len({p.value for p in near})
        elif N == 1:
            val = _pack_1d([(p.value[0] - _rho_upper(p, c), p.value[0] + _rho_upper(p, c)) for p in near],
                           lo[0], hi[0], L)
        else:
            val = _grid_count(near, c, lo, hi, L)
        if val > best:
            best, best_ball = val, (lo, hi)
    return {"max": best, "n": n, "m": m, "balls": len(balls), "members": len(pts), "argmax": best_ball}


def _grid_count(near, c, lo, hi, L) -> int:
    N = len(lo)
    cells = 0
    k = [int((b - a) / L) for a, b in zip(lo, hi)]
    for idx in product(*(range(x) for x in k)):
        clo = tuple(a + i * L for a, i in zip(lo, idx))
        chi = tuple(x + L for x in clo)
        if any(meets_box(p, c, clo, chi) for p in near):
            cells += 1
    return cells


def _q_estimate_padic(pts, B, R, c, n, m, mode):
    p = B.structure.p
    lvl_b = B.level + _log_p(R, p) * (n - m)
    lvl_s = B.level + _log_p(R, p) * n
    groups: dict = {}
    for pt in pts:
        key = padic_residue(pt.value[0], p, lvl_b)
        groups.setdefault(key, []).append(pt)
    best = 0
    for key, grp in groups.items():
        if mode == "qtilde":
            val = len({q.value for q in grp})
        else:
            sub = set()
            for q in grp:
                rho = q.rho(c)
                j = lvl_s
                while j > lvl_b and rho.cmp(Fraction(1, p ** (j - 1))) >= 0:
                    j -= 1
                base = padic_residue(q.value[0], p, j)
                for t in range(p ** (lvl_s - j)):
                    sub.add(base + t * p ** j)
            val = len(sub)
        best = max(best, val)
    return {"max": best, "n": n, "m": m, "balls": len(groups), "members": len(pts)}


def _power_ge(base: Fraction, exp: Fraction, y: Fraction) -> bool:
    """y <= base**exp exactly (base > 0, exp >= 0)."""
    if y <= 0:
        return True
    a, b = exp.numerator, exp.denominator
    return y ** b <= Fraction(base) ** a


def check_corollary(family: Family, B: Ball, R: int, eps, depth: int, mode: str = "qtilde", c=None,
                    constant=1, slack=8, cap: int = DEFAULT_CAP) -> dict:
    """Compare counts with constant * slack * f(R)^{m(1-eps)} for every (n, m) with n <= depth."""
    eps = to_fraction(eps)
    constant, slack = to_fraction(constant), to_fraction(slack)
    if c is None:
        c, _ = family.choose_c(B, R, depth)
    fR = B.structure.f(R)
    rows = []
    ok = True
    worst = None
    emp = Fraction(0)
    for n in range(1, depth + 1):
        subs = family.subclasses(n, R)
        ms = range(1, n + 1) if subs is None else sorted(x for x in subs if 1 <= x <= n)
        for m in ms:
            est = q_estimate(family, B, R, c, n, m, mode, cap=cap)
            count = est["max"]
            e = m * (1 - eps)
            good = _power_ge(Fraction(fR), e, Fraction(count) / (constant * slack))
            ok &= good
            lo, hi = power_bounds(Fraction(fR), e)
            ratio = Fraction(count) / lo if lo else Fraction(count)
            emp = max(emp, ratio)
            if worst is None or ratio > worst["ratio"]:
                worst = {"n": n, "m": m, "count": count, "ratio": ratio}
            rows.append({"n": n, "m": m, "count": count, "members": est["members"], "pass": good})
    return {"pass": ok, "mode": mode, "eps": eps, "constant": constant, "slack": slack,
            "empirical_constant": emp, "worst": worst, "rows": rows}


# ---------------------------------------------------------------- hyperplanes

def _rank_nullspace(rows: list[list[Fraction]]):
    """Row-reduce over Q; returns (rank, a nullspace vector or None)."""
    import sympy
    M = sympy.Matrix([[sympy.Rational(x.numerator, x.denominator) for x in r] for r in rows])
    ns = M.nullspace()
    vec = None
    if ns:
        v = ns[0]
        den = sympy.ilcm(*[x.q for x in v]) if len(v) else 1
        vec = [Fraction(int(x * den)) for x in v]
    return M.rank(), vec


def hyperplane_witness(points, n: int, R: int, c) -> dict:
    """Hyperplane through the given rational points, or the simplex-volume contradiction."""
    pts = [tuple(to_fraction(x) for x in (p if isinstance(p, (list, tuple)) else [p])) for p in points]
    if not pts:
        return {"hyperplane": None, "reason": "no points"}
    N = len(pts[0])
    qs = [math.lcm(*[x.denominator for x in p]) for p in pts]
    rows = [list(p) + [Fraction(-1)] for p in pts]
    # a . x = b for all points  <=>  [x, -1] . (a, b) = 0
    rank, vec = _rank_nullspace(rows)
    if vec is not None and any(vec[:N]):
        return {"hyperplane": {"normal": vec[:N], "offset": vec[N]}, "points": len(pts)}
    if N == 1 and len(pts) >= 2:
        x1, x2 = pts[0][0], pts[1][0]
        gap = abs(x1 - x2)
        return {"hyperplane": None, "spacing": gap, "spacing_bound": Fraction(1, qs[0] * qs[1]),
                "spacing_certificate": gap >= Fraction(1, qs[0] * qs[1])}
    # find N+1 affinely independent points and report the volume dichotomy
    import sympy
    from itertools import combinations
    for combo in combinations(range(len(pts)), N + 1):
        M = sympy.Matrix([[1] + [sympy.Rational(x.numerator, x.denominator) for x in pts[i]] for i in combo])
        det = M.det()
        if det != 0:
            vol = Fraction(int(sympy.fraction(abs(det))[0]), int(sympy.fraction(abs(det))[1])) / math.factorial(N)
            qprod = math.prod(qs[i] for i in combo)
            lower = Fraction(1, math.factorial(N) * qprod)
            box = Fraction(3) ** N / Fraction(R) ** (N * (n - 1))
            return {"hyperplane": None, "simplex": list(combo), "volume": vol, "volume_lower_bound": lower,
                    "box_bound": box, "contradiction": lower > box,
                    "volume_ge_lower": vol >= lower}
    return {"hyperplane": None, "reason": "degenerate"}


def class_rows(points: list[ResonantPoint]) -> list[list[str]]:
    """CSV rows (n, m, value, height, meta)."""
    from .exact import frac_str
    out = []
    for p in points:
        val = " ".join(frac_str(x) for x in p.value)
        h = p.height.exact
        hs = frac_str(h) if h is not None else f"~{float(p.height):.12g}"
        meta = ";".join(f"{k}={v}" for k, v in p.meta.items())
        out.append([str(p.n), str(p.m), val, hs, meta])
    return out
