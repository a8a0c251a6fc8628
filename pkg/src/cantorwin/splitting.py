"""Splitting structures and exact ball subdivision.

A structure (X, S, U, f) says how a ball splits at scale u into f(u)
sub-balls of radius rad/u. Three families are supported: the canonical
sup-norm grid on R^N, the middle-third rule on R, and the canonical
digit-prefix balls of Z_p^N.

Internally a ball at cumulative scale P below an origin ball is a tuple of
integer coordinates ``k`` with ``0 <= k_d < P``:

* real structures: the box with per-coordinate edges
  ``lo_d + k_d * side / P`` and ``lo_d + (k_d + 1) * side / P``;
* p-adic: the residue class ``res_d + p**level * k_d (mod p**level * P)``.

Addresses (lists of ``(u, child_index)``) are the public, portable form and
convert to and from coordinates without loss.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterable, Sequence

from .errors import ConfigError, TrivialStructure, UnsupportedScale
from .exact import padic_abs, padic_residue, to_fraction

KINDS = ("euclidean_box", "middle_third", "padic")
_ALIASES = {
    "euclidean": "euclidean_box", "euclidean_box": "euclidean_box", "euclid": "euclidean_box",
    "box": "euclidean_box", "middle_third": "middle_third", "middle-third": "middle_third",
    "cantor": "middle_third", "padic": "padic", "p-adic": "padic",
}


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    return all(p % d for d in range(2, math.isqrt(p) + 1))


@dataclass(frozen=True)
class SplittingStructure:
    kind: str
    N: int = 1
    p: int = 0
    packing: int | None = None

    def __post_init__(self):
        kind = _ALIASES.get(str(self.kind).lower())
        if kind is None:
            raise ConfigError(f"unknown structure kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        object.__setattr__(self, "kind", kind)
        if not isinstance(self.N, int) or self.N < 1:
            raise ConfigError("N must be a positive integer")
        if kind == "middle_third" and self.N != 1:
            raise ConfigError("the middle-third structure lives on R (N=1)")
        if kind == "padic" and not _is_prime(self.p):
            raise ConfigError(f"p must be prime, got {self.p}")
        if self.packing is not None and self.packing < 1:
            raise ConfigError("packing constant must be a positive integer")

    # constructors
    @classmethod
    def euclidean_box(cls, N: int = 1, packing: int | None = None):
        return cls("euclidean_box", N=N, packing=packing)

    @classmethod
    def middle_third(cls, packing: int | None = None):
        return cls("middle_third", packing=packing)

    @classmethod
    def padic(cls, p: int, N: int = 1, packing: int | None = None):
        return cls("padic", N=N, p=p, packing=packing)

    # descriptors
    @property
    def is_padic(self) -> bool:
        return self.kind == "padic"

    @property
    def base(self) -> int | None:
        """Generator u0 of U, or None when U is all positive integers."""
        if self.kind == "middle_third":
            return 3
        if self.kind == "padic":
            return self.p
        return None

    @property
    def packing_constant(self) -> int:
        if self.packing is not None:
            return self.packing
        if self.kind == "euclidean_box":
            return 3 ** self.N
        if self.kind == "middle_third":
            return 3
        return 1

    def exponent(self, u: int) -> int:
        """k with u = base**k; raises UnsupportedScale otherwise."""
        b = self.base
        if not isinstance(u, int) or u < 1:
            raise UnsupportedScale(f"scale must be a positive integer, got {u!r}")
        if b is None:
            return 1
        k = 0
        v = u
        while v % b == 0:
            v //= b
            k += 1
        if v != 1:
            raise UnsupportedScale(f"{u} is not a power of {b}")
        return k

    def is_scale(self, u) -> bool:
        try:
            self.exponent(u)
            return True
        except UnsupportedScale:
            return False

    def f(self, u: int) -> int:
        k = self.exponent(u)
        if self.kind == "euclidean_box":
            return u ** self.N
        if self.kind == "middle_third":
            return 2 ** k
        return u ** self.N

    def scales(self, limit: int) -> list[int]:
        """Represented scales u with 1 < u <= limit, increasing."""
        if self.base is None:
            return list(range(2, limit + 1))
        out, u = [], self.base
        while u <= limit:
            out.append(u)
            u *= self.base
        return out

    def u0(self) -> int:
        """Smallest represented u with f(u) > C(X)."""
        C = self.packing_constant
        u = self.base or 2
        while self.f(u) <= C:
            u = u * self.base if self.base else u + 1
        return u

    def dim(self) -> float:
        """log f(u0) / log u0 for the generating base."""
        d = self.dim_exact()
        if d is not None:
            return float(d)
        b = self.base
        fb = self.f(b)
        if fb == 1:
            raise TrivialStructure("f is identically 1")
        return math.log(fb) / math.log(b)

    def dim_exact(self) -> Fraction | None:
        if self.kind in ("euclidean_box", "padic"):
            return Fraction(self.N)
        return None

    # serialization
    def to_json(self) -> dict:
        params = {"N": self.N}
        if self.kind == "padic":
            params["p"] = self.p
        return {"kind": self.kind, "params": params, "packing_constant": self.packing_constant}

    @classmethod
    def from_json(cls, d: dict) -> "SplittingStructure":
        if not isinstance(d, dict) or "kind" not in d:
            raise ConfigError("structure descriptor must be an object with a 'kind' field")
        params = d.get("params", {}) or {}
        kind = _ALIASES.get(str(d["kind"]).lower(), d["kind"])
        packing = d.get("packing_constant")
        default = cls(kind, N=int(params.get("N", 1)), p=int(params.get("p", 0)))
        if packing is not None and int(packing) == default.packing_constant:
            packing = None
        return cls(kind, N=int(params.get("N", 1)), p=int(params.get("p", 0)),
                   packing=None if packing is None else int(packing))

    # grid internals
    def child_offsets(self, u: int) -> list[tuple[int, ...]]:
        return _child_offsets(self, u)

    def valid_coordinate(self, k: int, P: int) -> bool:
        """Whether a coordinate at cumulative scale P is a ball of the structure."""
        if not 0 <= k < P:
            return False
        if self.kind != "middle_third":
            return True
        while P > 1:
            if k % 3 == 1:
                return False
            k //= 3
            P //= 3
        return True

    def default_origin(self) -> "Origin":
        if self.is_padic:
            return Origin.padic((0,) * self.N, 0)
        return Origin.real((Fraction(1, 2),) * self.N, Fraction(1, 2))


@lru_cache(maxsize=256)
def _child_offsets(s: SplittingStructure, u: int) -> list[tuple[int, ...]]:
    s.exponent(u)
    if s.kind == "euclidean_box":
        return list(itertools.product(range(u), repeat=s.N))
    if s.kind == "middle_third":
        t = s.exponent(u)
        out = []
        for bits in itertools.product((0, 2), repeat=t):
            off = 0
            for b in bits:
                off = off * 3 + b
            out.append((off,))
        return out
    return list(itertools.product(range(u), repeat=s.N))


@dataclass(frozen=True)
class Origin:
    """Root region: a real box (center, radius) or a p-adic residue class."""
    center: tuple | None = None
    radius: Fraction | None = None
    residues: tuple | None = None
    level: int = 0

    @classmethod
    def real(cls, center: Sequence, radius) -> "Origin":
        r = to_fraction(radius)
        if r <= 0:
            raise ConfigError("origin radius must be positive")
        return cls(center=tuple(to_fraction(c) for c in center), radius=r)

    @classmethod
    def interval(cls, lo, hi) -> "Origin":
        lo, hi = to_fraction(lo), to_fraction(hi)
        if hi <= lo:
            raise ConfigError("empty origin interval")
        return cls.real(((lo + hi) / 2,), (hi - lo) / 2)

    @classmethod
    def padic(cls, residues: Sequence[int], level: int) -> "Origin":
        return cls(residues=tuple(int(r) for r in residues), level=int(level))

    @property
    def is_padic(self) -> bool:
        return self.residues is not None

    def rad(self, p: int = 0) -> Fraction:
        if self.is_padic:
            return Fraction(1, p ** self.level)
        return self.radius

    def lo(self) -> tuple:
        return tuple(c - self.radius for c in self.center)

    def to_json(self) -> dict:
        from .exact import frac_json
        if self.is_padic:
            return {"residues": list(self.residues), "level": self.level}
        return {"center": [frac_json(c) for c in self.center], "radius": frac_json(self.radius)}

    @classmethod
    def from_json(cls, d: dict) -> "Origin":
        if "residues" in d:
            return cls.padic(d["residues"], d.get("level", 0))
        return cls.real(d["center"], d["radius"])


@dataclass(frozen=True)
class Ball:
    """A node of the subdivision tree: origin plus an address of (u, index) steps."""
    structure: SplittingStructure
    origin: Origin
    address: tuple = ()

    # coordinates are derived once and cached; the dataclass stays a value
    _coords: tuple | None = field(default=None, compare=False, repr=False, hash=False)
    _scale: int | None = field(default=None, compare=False, repr=False, hash=False)

    @classmethod
    def root(cls, structure: SplittingStructure, origin: Origin | None = None) -> "Ball":
        origin = origin or structure.default_origin()
        if origin.is_padic != structure.is_padic:
            raise ConfigError("origin type does not match the structure")
        dim = len(origin.residues if origin.is_padic else origin.center)
        if dim != structure.N:
            raise ConfigError("origin dimension does not match the structure")
        return cls(structure, origin, (), (0,) * structure.N, 1)

    @classmethod
    def from_coords(cls, structure, origin, scales: Sequence[int], coords) -> "Ball":
        """Build a ball from its coordinates at cumulative scale prod(scales)."""
        if isinstance(coords, int):
            coords = (coords,)
        coords = tuple(int(c) for c in coords)
        address = coords_to_address(structure, scales, coords)
        P = math.prod(scales)
        return cls(structure, origin, address, coords, P)

    @cached_property
    def _derived(self) -> tuple[tuple, int]:
        if self._coords is not None and self._scale is not None:
            return self._coords, self._scale
        return address_to_coords(self.structure, self.address), math.prod(u for u, _ in self.address)

    @property
    def coords(self) -> tuple:
        return self._derived[0]

    @property
    def scale(self) -> int:
        return self._derived[1]

    @property
    def depth(self) -> int:
        return len(self.address)

    @property
    def rad(self) -> Fraction:
        return self.origin.rad(self.structure.p) / self.scale

    @property
    def diam(self) -> Fraction:
        return self.rad if self.structure.is_padic else 2 * self.rad

    # real geometry
    @cached_property
    def bounds(self) -> tuple[tuple, tuple]:
        if self.structure.is_padic:
            raise TypeError("p-adic balls have no interval bounds")
        side = 2 * self.origin.radius / self.scale
        lo = tuple(l + k * side for l, k in zip(self.origin.lo(), self.coords))
        hi = tuple(x + side for x in lo)
        return lo, hi

    @property
    def center(self) -> tuple:
        if self.structure.is_padic:
            return self.residues
        lo, hi = self.bounds
        return tuple((a + b) / 2 for a, b in zip(lo, hi))

    # p-adic geometry
    @property
    def level(self) -> int:
        """Digit-prefix length for p-adic balls."""
        p = self.structure.p
        return self.origin.level + round(math.log(self.scale, p)) if self.scale > 1 else self.origin.level

    @cached_property
    def residues(self) -> tuple:
        if not self.structure.is_padic:
            raise TypeError("real balls have no residues")
        p = self.structure.p
        step = p ** self.origin.level
        mod = step * self.scale
        return tuple((r + step * k) % mod for r, k in zip(self.origin.residues, self.coords))

    @property
    def modulus(self) -> int:
        return self.structure.p ** self.origin.level * self.scale

    # tree operations
    def split(self, u: int) -> list["Ball"]:
        s = self.structure
        s.exponent(u)
        P = self.scale
        out = []
        for j, off in enumerate(s.child_offsets(u)):
            if s.is_padic:
                coords = tuple(k + o * P for k, o in zip(self.coords, off))
            else:
                coords = tuple(k * u + o for k, o in zip(self.coords, off))
            out.append(Ball(s, self.origin, self.address + ((u, j),), coords, P * u))
        return out

    def parent(self) -> "Ball":
        if not self.address:
            raise ValueError("the root has no parent")
        return Ball(self.structure, self.origin, self.address[:-1])

    # predicates (all exact)
    def contains_point(self, x) -> bool:
        s = self.structure
        if s.is_padic:
            xs = x if isinstance(x, (tuple, list)) else (x,)
            mod = self.modulus
            return all(padic_residue(to_fraction(v), s.p, 0) == 0 and _padic_mod(v, s.p, mod) == r
                       for v, r in zip(xs, self.residues))
        xs = x if isinstance(x, (tuple, list)) else (x,)
        lo, hi = self.bounds
        return all(a <= to_fraction(v) <= b for v, a, b in zip(xs, lo, hi))

    def contains_ball(self, other: "Ball") -> bool:
        if self.structure.is_padic:
            if other.modulus % self.modulus:
                return False
            return all(r % self.modulus == s for r, s in zip(other.residues, self.residues))
        lo, hi = self.bounds
        olo, ohi = other.bounds
        return all(a <= c and d <= b for a, b, c, d in zip(lo, hi, olo, ohi))

    def meets_ball(self, other: "Ball") -> bool:
        if self.structure.is_padic:
            m = min(self.modulus, other.modulus)
            return all(a % m == b % m for a, b in zip(self.residues, other.residues))
        lo, hi = self.bounds
        olo, ohi = other.bounds
        return all(a <= d and c <= b for a, b, c, d in zip(lo, hi, olo, ohi))

    def distance_to_point(self, x) -> Fraction:
        """Sup-norm (or p-adic) distance from the center to a point."""
        s = self.structure
        xs = x if isinstance(x, (tuple, list)) else (x,)
        if s.is_padic:
            return max(padic_abs(to_fraction(v) - r, s.p) for v, r in zip(xs, self.residues))
        return max(abs(to_fraction(v) - c) for v, c in zip(xs, self.center))

    def address_json(self) -> list:
        return [[u, j] for u, j in self.address]

    def region_key(self):
        """Hashable identity of the region (independent of the address path)."""
        if self.structure.is_padic:
            return ("p", self.modulus, self.residues)
        return ("r",) + self.bounds


def _padic_mod(v, p, mod) -> int:
    v = to_fraction(v)
    return (v.numerator * pow(v.denominator, -1, mod)) % mod if mod > 1 else 0


def address_to_coords(s: SplittingStructure, address: Iterable) -> tuple:
    coords = (0,) * s.N
    P = 1
    for u, j in address:
        offs = s.child_offsets(u)
        if not 0 <= j < len(offs):
            raise ConfigError(f"child index {j} out of range for scale {u}")
        off = offs[j]
        if s.is_padic:
            coords = tuple(k + o * P for k, o in zip(coords, off))
        else:
            coords = tuple(k * u + o for k, o in zip(coords, off))
        P *= u
    return coords


def coords_to_address(s: SplittingStructure, scales: Sequence[int], coords) -> tuple:
    """Inverse of address_to_coords along a given scale sequence."""
    coords = list(coords)
    steps = []
    if s.is_padic:
        P = 1
        for u in scales:
            digits = tuple((k // P) % u for k in coords)
            steps.append((u, _offset_index(s, u, digits)))
            P *= u
        return tuple(steps)
    for u in reversed(scales):
        digits = tuple(k % u for k in coords)
        coords = [k // u for k in coords]
        steps.append((u, _offset_index(s, u, digits)))
    if any(coords):
        raise ConfigError("coordinates outside the origin ball")
    return tuple(reversed(steps))


@lru_cache(maxsize=256)
def _offset_table(s: SplittingStructure, u: int) -> dict:
    return {off: j for j, off in enumerate(s.child_offsets(u))}


def _offset_index(s, u, digits) -> int:
    try:
        return _offset_table(s, u)[tuple(digits)]
    except KeyError:
        raise ConfigError(f"coordinates do not name a ball of the structure at scale {u}") from None


def split(b: Ball, u: int) -> list[Ball]:
    """The f(u) children of b at scale u, in canonical order."""
    return b.split(u)


def verify_axioms(s: SplittingStructure, b: Ball, u: int, v: int) -> dict:
    """Exact check of the three splitting axioms at scales u, v below b."""
    kids = b.split(u)
    s1 = len(kids) == s.f(u)
    need = 2 * b.rad / u if not s.is_padic else b.rad / u
    s2 = True
    for i in range(len(kids)):
        for j in range(i + 1, len(kids)):
            if s.is_padic:
                d = max(padic_abs(Fraction(x - y), s.p) for x, y in zip(kids[i].residues, kids[j].residues))
            else:
                d = max(abs(x - y) for x, y in zip(kids[i].center, kids[j].center))
            if d < need:
                s2 = False
                break
        if not s2:
            break
    direct = {c.region_key() for c in b.split(u * v)}
    composed = {g.region_key() for c in kids for g in c.split(v)}
    s3 = direct == composed
    return {
        "count": {"pass": s1, "count": len(kids), "expected": s.f(u)},
        "separation": {"pass": s2, "min_separation": str(need)},
        "composition": {"pass": s3, "direct": len(direct), "composed": len(composed)},
        "pass": s1 and s2 and s3,
    }


def dim_a_infty(s: SplittingStructure) -> float:
    return s.dim()


def a_u_membership(x, b: Ball, u_chain: Sequence[int]) -> bool:
    """Finite-depth membership of x in the union of S(b, u_k) for the last u_k."""
    s = b.structure
    if not u_chain:
        return b.contains_point(x)
    prev = 1
    for u in u_chain:
        s.exponent(u)
        if u % prev:
            raise UnsupportedScale(f"scale chain is not a divisibility chain at {u}")
        prev = u
    if not b.contains_point(x):
        return False
    # walk down the chain, keeping every ball that contains x (boundary points
    # can belong to two neighbours)
    frontier = [b]
    prev = 1
    for u in u_chain:
        step = u // prev
        prev = u
        if step == 1:
            continue
        nxt = []
        for ball in frontier:
            nxt.extend(c for c in _children_containing(ball, step, x))
        if not nxt:
            return False
        frontier = nxt
    return True


def _children_containing(ball: Ball, u: int, x) -> list[Ball]:
    s = ball.structure
    if s.is_padic:
        return [c for c in ball.split(u) if c.contains_point(x)]
    xs = x if isinstance(x, (tuple, list)) else (x,)
    lo, hi = ball.bounds
    cands_per_axis = []
    for v, a, bnd in zip(xs, lo, hi):
        t = (to_fraction(v) - a) * u / (bnd - a)
        k = math.floor(t)
        ks = {min(max(k, 0), u - 1)}
        if t == k and k > 0:
            ks.add(k - 1)
        cands_per_axis.append(sorted(ks))
    out = []
    offs = _offset_table(s, u)
    for digits in itertools.product(*cands_per_axis):
        if digits in offs:
            child = Ball(s, ball.origin, ball.address + ((u, offs[digits]),),
                         tuple(k * u + d for k, d in zip(ball.coords, digits)), ball.scale * u)
            out.append(child)
    return out


def packing_count(K: Fraction, N: int = 1) -> int:
    """Sup-norm count of radius-r grid-like boxes meeting a closed radius-K*r box.

    Boxes are closed with pairwise disjoint interiors (they may share faces,
    as children of a split do). In one dimension the centers lie in
    [-(K+1)r, (K+1)r] with spacing at least 2r; the count is found by greedy
    left-to-right placement, which is optimal on a line. Sup-norm balls are
    products, so the N-dimensional count is the N-th power.
    """
    K = to_fraction(K)
    lo, hi = -(K + 1), K + 1
    count, pos = 0, lo
    while pos <= hi:
        count += 1
        pos += 2
    return count ** N
