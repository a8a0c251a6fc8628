"""Generalized Cantor trees under removal budgets.

A tree is stored level by level. Level ``n`` is a numpy array of flat codes
(the integer grid coordinates of each survivor at cumulative scale
``P_n = R_0 * ... * R_{n-1}``), in canonical order, together with the index
of each survivor's parent in level ``n-1`` and its child index within the
parent's split. Because canonical order is lexicographic in addresses, the
descendants of any ball form a contiguous run at every deeper level; the
engine relies on this to group candidates by ancestor cheaply.

Going from level n to n+1 the engine splits every expanded survivor, then
runs the charge stages m = n, n-1, ..., 0. At stage m the still-alive
candidates are grouped by their level-m ancestor and the oracle picks which
of them to remove, at most floor(r_{m,n}) per ancestor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np
from mpmath import iv

from .errors import (BudgetExceeded, ConfigError, DivergentCell, DivisionByZeroT, EmptyLevel,
                     InvariantBreach, PreconditionREps, TrimCollapse)
from .exact import (frac_json, iv_bounds, iv_of, ivprec, power_bounds, power_floor, to_fraction)
from .splitting import Ball, Origin, SplittingStructure

_INT64_LIMIT = 1 << 62


# ---------------------------------------------------------------- budgets

class BudgetMatrix:
    """Triangular removal budgets r_{m,n}, stored as certified (lo, hi) cells.

    ``lo == hi`` whenever the cell is an exact rational. Enforcement uses the
    exact floor; certificates use ``hi``.
    """

    def __init__(self, cell_fn: Callable[[int, int], tuple], depth: int, form: str = "explicit",
                 params: dict | None = None, floor_fn: Callable[[int, int], int] | None = None,
                 divergent: Callable[[int, int], bool] | None = None):
        self._fn = cell_fn
        self._floor_fn = floor_fn
        self._divergent = divergent
        self.depth = depth
        self.form = form
        self.params = params or {}
        self._cache: dict = {}

    # constructors
    @classmethod
    def explicit(cls, cells, depth: int | None = None) -> "BudgetMatrix":
        """From {(m, n): value} or a nested list r[m][n]."""
        table = {}
        if isinstance(cells, dict):
            items = cells.items()
        else:
            items = (((m, n), v) for m, row in enumerate(cells) for n, v in enumerate(row) if v is not None)
        for (m, n), v in items:
            m, n = int(m), int(n)
            if m > n or m < 0:
                raise ConfigError(f"budget cell ({m},{n}) is outside the triangle m <= n")
            v = to_fraction(v)
            if v < 0:
                raise ConfigError(f"budget cell ({m},{n}) is negative")
            table[(m, n)] = v
        if depth is None:
            depth = max((n for _, n in table), default=0)
        zero = Fraction(0)

        def fn(m, n):
            v = table.get((m, n), zero)
            return v, v
        b = cls(fn, depth, "explicit", {"cells": table})
        return b

    @classmethod
    def zeros(cls, depth: int) -> "BudgetMatrix":
        return cls.explicit({}, depth)

    @classmethod
    def local(cls, s: Sequence) -> "BudgetMatrix":
        """Local budgets: r_{n,n} = s_n, zero elsewhere."""
        return cls.explicit({(n, n): v for n, v in enumerate(s)}, len(s) - 1)

    @classmethod
    def cantor_winning(cls, fR, eps, depth: int, R: int | None = None) -> "BudgetMatrix":
        """r_{m,n} = f(R)^{(n-m+1)(1-eps)}."""
        fR, eps = to_fraction(fR), to_fraction(eps)
        if not 0 < eps < 1:
            raise ConfigError("epsilon must lie in (0, 1)")
        if fR < 1:
            raise ConfigError("f(R) must be at least 1")

        def fn(m, n):
            return power_bounds(fR, (n - m + 1) * (1 - eps))

        def fl(m, n):
            return power_floor(fR, (n - m + 1) * (1 - eps))
        return cls(fn, depth, "cantor_winning", {"fR": fR, "eps": eps, "R": R}, floor_fn=fl)

    # access
    def cell(self, m: int, n: int) -> tuple[Fraction, Fraction]:
        if m < 0 or m > n:
            return Fraction(0), Fraction(0)
        key = (m, n)
        v = self._cache.get(key)
        if v is None:
            if self._divergent is not None and self._divergent(m, n):
                raise DivergentCell(f"cell ({m},{n}) receives infinitely many contributions")
            v = self._fn(m, n)
            self._cache[key] = v
        return v

    def upper(self, m: int, n: int) -> Fraction:
        return self.cell(m, n)[1]

    def lower(self, m: int, n: int) -> Fraction:
        return self.cell(m, n)[0]

    def floor(self, m: int, n: int) -> int:
        if self._floor_fn is not None and 0 <= m <= n:
            return self._floor_fn(m, n)
        lo, hi = self.cell(m, n)
        return math.floor(lo)

    def is_local(self, depth: int | None = None) -> bool:
        depth = self.depth if depth is None else depth
        return all(self.upper(m, n) == 0 for n in range(depth + 1) for m in range(n))

    def to_json(self, depth: int | None = None) -> dict:
        depth = self.depth if depth is None else depth
        cells = []
        for n in range(depth + 1):
            for m in range(n + 1):
                lo, hi = self.cell(m, n)
                if hi == 0:
                    continue
                entry = {"m": m, "n": n, "value": frac_json(lo)} if lo == hi else \
                    {"m": m, "n": n, "lo": frac_json(lo), "hi": frac_json(hi)}
                cells.append(entry)
        out = {"form": self.form, "depth": depth, "cells": cells}
        if self.form == "cantor_winning":
            out["fR"] = frac_json(self.params["fR"])
            out["eps"] = frac_json(self.params["eps"])
        return out

    @classmethod
    def from_json(cls, d: dict) -> "BudgetMatrix":
        if d.get("form") == "cantor_winning" and "fR" in d:
            return cls.cantor_winning(d["fR"], d["eps"], int(d.get("depth", 0)))
        table = {}
        for c in d.get("cells", []):
            table[(int(c["m"]), int(c["n"]))] = c["value"] if "value" in c else c["hi"]
        return cls.explicit(table, int(d.get("depth", 0)))


def parse_cells(text: str) -> dict:
    """Parse "m,n:value;m,n:value" into a cell dict."""
    out = {}
    for part in filter(None, (p.strip() for p in str(text).replace(" ", ";").split(";"))):
        try:
            idx, val = part.split(":")
            m, n = (int(x) for x in idx.split(","))
        except ValueError as exc:
            raise ConfigError(f"cannot parse budget cell {part!r} (expected m,n:value)") from exc
        out[(m, n)] = to_fraction(val)
    return out


def intersect_budgets(budgets: Sequence[BudgetMatrix]) -> BudgetMatrix:
    """Cell-wise sum; a tree compliant with the sum is compliant with each input."""
    budgets = list(budgets)
    if not budgets:
        raise ConfigError("intersect_budgets needs at least one matrix")

    def fn(m, n):
        lo = hi = Fraction(0)
        for b in budgets:
            a, c = b.cell(m, n)
            lo += a
            hi += c
        return lo, hi

    def fl(m, n):
        # floor of the lower end: exact for rational cells, conservative otherwise
        return math.floor(fn(m, n)[0])

    def div(m, n):
        return any(b._divergent is not None and b._divergent(m, n) for b in budgets)
    return BudgetMatrix(fn, min(b.depth for b in budgets), "sum", {"parts": len(budgets)}, floor_fn=fl, divergent=div)


def lazy_sum(stream_fn: Callable[[int, int], Iterable], depth: int, cap: int = 10 ** 6) -> BudgetMatrix:
    """Sum of a countable family given per cell as a finite iterable of (lo, hi).

    ``stream_fn(m, n)`` may return None to flag a cell with infinitely many
    non-zero contributions.
    """
    def fn(m, n):
        it = stream_fn(m, n)
        lo = hi = Fraction(0)
        for k, (a, b) in enumerate(it):
            if k >= cap:
                raise DivergentCell(f"cell ({m},{n}) exceeded {cap} contributions")
            lo += a
            hi += b
        return lo, hi
    return BudgetMatrix(fn, depth, "sum", {}, divergent=lambda m, n: stream_fn(m, n) is None)


def reindex_power(budgets: BudgetMatrix, k: int) -> BudgetMatrix:
    """Budgets at scale R^k re-expressed at scale R.

    t_{m,n} = r_{m/k, (n+1)/k - 1} when k divides m and n+1, else 0.
    """
    if k < 1:
        raise ConfigError("k must be a positive integer")
    zero = (Fraction(0), Fraction(0))

    def fn(m, n):
        if m % k or (n + 1) % k:
            return zero
        return budgets.cell(m // k, (n + 1) // k - 1)

    def fl(m, n):
        if m % k or (n + 1) % k:
            return 0
        return budgets.floor(m // k, (n + 1) // k - 1)

    def div(m, n):
        if m % k or (n + 1) % k or budgets._divergent is None:
            return False
        return budgets._divergent(m // k, (n + 1) // k - 1)
    return BudgetMatrix(fn, k * (budgets.depth + 1) - 1, "reindexed", {"k": k}, floor_fn=fl, divergent=div)


def scale_budget_bilipschitz(budgets: BudgetMatrix, C_pack: int, K=None) -> BudgetMatrix:
    """Multiply every cell by C = C_pack**2."""
    C = Fraction(C_pack) ** 2

    def fn(m, n):
        lo, hi = budgets.cell(m, n)
        return C * lo, C * hi
    return BudgetMatrix(fn, budgets.depth, "scaled", {"C": C, "K": K})


# ---------------------------------------------------------------- t-sequence

def _fvals(f_values, depth: int) -> list[int]:
    if isinstance(f_values, (int, Fraction)):
        return [f_values] * (depth + 1)
    f_values = list(f_values)
    if len(f_values) < depth + 1:
        f_values += [f_values[-1]] * (depth + 1 - len(f_values))
    return f_values


def t_sequence(budgets: BudgetMatrix, f_values, depth: int) -> list[Fraction]:
    """t_n = f(R_n) - r_{n,n} - sum_k r_{n-k,n} / prod_{i=1..k} t_{n-i}.

    Upper bounds of the budget cells are used, so the result is exact for
    rational budgets and a certified lower bound otherwise.
    """
    fv = _fvals(f_values, depth)
    t: list[Fraction] = []
    for n in range(depth + 1):
        t.append(t_sequence_step(budgets, fv, t, n))
    return t


def nonempty_certificate(budgets: BudgetMatrix, f_values, depth: int) -> tuple[bool, list[Fraction]]:
    """(all t_n > 0 for n <= depth, the computed prefix of t).

    Stops at the first non-positive t_n instead of dividing by it.
    """
    fv = _fvals(f_values, depth)
    t: list[Fraction] = []
    for n in range(depth + 1):
        t.append(t_sequence_step(budgets, fv, t, n))
        if t[-1] <= 0:
            return False, t
    return True, t


def t_sequence_step(budgets, fv, t, n) -> Fraction:
    v = Fraction(fv[n]) - budgets.upper(n, n)
    prod = Fraction(1)
    for k in range(1, n + 1):
        if t[n - k] == 0:
            raise DivisionByZeroT(f"t_{n - k} = 0 is needed to compute t_{n}")
        prod *= t[n - k]
        r = budgets.upper(n - k, n)
        if r:
            v -= r / prod
    return v


# ---------------------------------------------------------------- trees

def _scale_products(scales: Sequence[int]) -> list[int]:
    P = [1]
    for u in scales:
        P.append(P[-1] * u)
    return P


def _code_dtype(P: int, N: int):
    return np.int64 if P ** N < _INT64_LIMIT else object


def encode(coords: np.ndarray, P: int, N: int) -> np.ndarray:
    """(len, N) coordinate array -> flat codes at scale P."""
    if N == 1:
        return coords[:, 0]
    out = coords[:, 0].copy()
    for d in range(1, N):
        out = out * P + coords[:, d]
    return out


def decode(codes: np.ndarray, P: int, N: int) -> np.ndarray:
    if N == 1:
        return codes.reshape(-1, 1)
    out = np.empty((len(codes), N), dtype=codes.dtype)
    rest = codes.copy()
    for d in range(N - 1, -1, -1):
        out[:, d] = rest % P
        rest = rest // P
    return out


@dataclass
class CantorTree:
    structure: SplittingStructure
    origin: Origin
    scales: list
    levels: list = field(default_factory=list)        # flat codes per level
    parents: list = field(default_factory=list)       # parent index per level (level 0: empty)
    childidx: list = field(default_factory=list)      # child index within parent's split
    expanded: dict = field(default_factory=dict)      # level -> bool mask of expanded survivors
    removals: dict = field(default_factory=dict)      # (m, n) -> (ancestor idx array, parent idx array, child idx array)
    observed: dict = field(default_factory=dict)      # (m, n) -> max removals under one ancestor
    budgets: BudgetMatrix | None = None
    empty_level: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    @property
    def N(self) -> int:
        return self.structure.N

    def scale(self, n: int) -> int:
        return math.prod(self.scales[:n])

    def f_values(self) -> list[int]:
        return [self.structure.f(u) for u in self.scales]

    def size(self, n: int) -> int:
        return len(self.levels[n])

    def sizes(self) -> list[int]:
        return [len(x) for x in self.levels]

    def coords(self, n: int) -> np.ndarray:
        return decode(self.levels[n], self.scale(n), self.N)

    def ball(self, n: int, i: int) -> Ball:
        c = self.coords(n)[i] if self.N > 1 else (self.levels[n][i],)
        return Ball.from_coords(self.structure, self.origin, self.scales[:n], tuple(int(x) for x in c))

    def balls(self, n: int) -> list[Ball]:
        cs = self.coords(n)
        return [Ball.from_coords(self.structure, self.origin, self.scales[:n], tuple(int(x) for x in c))
                for c in cs]

    def frontier(self, n: int) -> np.ndarray:
        """Indices of level-n survivors that were not expanded."""
        mask = self.expanded.get(n)
        if mask is None:
            return np.zeros(0, dtype=np.int64)
        return np.flatnonzero(~mask)

    @property
    def has_frontier(self) -> bool:
        return any((~m).any() for m in self.expanded.values())

    def is_local(self) -> bool:
        return all(cnt == 0 for (m, n), cnt in self.observed.items() if m != n)

    def s_values(self) -> list[int]:
        """Max removals per parent at each level (the local budget actually used)."""
        return [self.observed.get((n, n), 0) for n in range(self.depth)]

    def ancestor_index(self, n: int, m: int, idx: np.ndarray) -> np.ndarray:
        """Index at level m of the level-m ancestor of survivors idx at level n."""
        out = np.asarray(idx)
        for lev in range(n, m, -1):
            out = self.parents[lev][out]
        return out

    def descendant_range(self, n: int, i: int, level: int) -> tuple[int, int]:
        """Contiguous [lo, hi) index run of the level-`level` descendants of (n, i)."""
        lo, hi = i, i + 1
        for lev in range(n + 1, level + 1):
            par = self.parents[lev]
            lo = int(np.searchsorted(par, lo, side="left"))
            hi = int(np.searchsorted(par, hi, side="left"))
        return lo, hi

    def children_counts(self, n: int) -> np.ndarray:
        """Number of surviving children for each level-n survivor."""
        if n >= self.depth:
            return np.zeros(self.size(n), dtype=np.int64)
        return np.bincount(self.parents[n + 1], minlength=self.size(n))

    def removal_log(self):
        """Yield (n, m, ancestor Ball, removed Ball) in charge order."""
        for n in range(self.depth):
            for m in range(n, -1, -1):
                rec = self.removals.get((m, n))
                if rec is None:
                    continue
                anc, par, ch = rec
                for a, p, c in zip(anc, par, ch):
                    parent = self.ball(n, int(p))
                    yield n, m, self.ball(m, int(a)), parent.split(self.scales[n])[int(c)]

    def removal_counts(self) -> dict:
        """Re-scan of the removal log: (m, n) -> {ancestor index: count}."""
        out = {}
        for key, (anc, _, _) in self.removals.items():
            vals, cnts = np.unique(np.asarray(anc, dtype=np.int64), return_counts=True)
            out[key] = dict(zip(vals.tolist(), cnts.tolist()))
        return out

    def observed_budgets(self) -> BudgetMatrix:
        return BudgetMatrix.explicit({k: v for k, v in self.observed.items() if v}, max(self.depth - 1, 0))

    # serialization
    def to_json(self, include_removals: bool = True) -> dict:
        d = {
            "structure": self.structure.to_json(),
            "origin": self.origin.to_json(),
            "scales": list(self.scales),
            "depth": self.depth,
            "levels": [
                {"parent": [int(x) for x in self.parents[n]], "child": [int(x) for x in self.childidx[n]]}
                for n in range(len(self.levels))
            ],
            "expanded": {str(n): [int(i) for i in np.flatnonzero(m)] for n, m in sorted(self.expanded.items())
                         if not m.all()},
            "observed": [{"m": m, "n": n, "count": int(c)} for (m, n), c in sorted(self.observed.items())],
            "empty_level": self.empty_level,
            "meta": _jsonable(self.meta),
        }
        if self.budgets is not None:
            d["budgets"] = self.budgets.to_json(max(self.depth - 1, 0))
        if include_removals:
            d["removals"] = [
                {"m": m, "n": n, "ancestor": [int(x) for x in a], "parent": [int(x) for x in p],
                 "child": [int(x) for x in c]}
                for (m, n), (a, p, c) in sorted(self.removals.items())
            ]
        return d

    @classmethod
    def from_json(cls, d: dict) -> "CantorTree":
        try:
            s = SplittingStructure.from_json(d["structure"])
            origin = Origin.from_json(d["origin"])
            scales = [int(u) for u in d["scales"]]
            raw = d["levels"]
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed tree file: missing {exc}") from exc
        tree = cls(s, origin, scales)
        P = _scale_products(scales)
        tree.levels.append(np.zeros(1, dtype=_code_dtype(1, s.N)))
        tree.parents.append(np.zeros(0, dtype=np.int64))
        tree.childidx.append(np.zeros(0, dtype=np.int64))
        for n in range(1, len(raw)):
            par = np.asarray(raw[n]["parent"], dtype=np.int64)
            ch = np.asarray(raw[n]["child"], dtype=np.int64)
            offs = np.asarray(s.child_offsets(scales[n - 1]), dtype=object if P[n] ** s.N >= _INT64_LIMIT else np.int64)
            pc = decode(tree.levels[n - 1], P[n - 1], s.N)[par] if len(par) else np.zeros((0, s.N), dtype=np.int64)
            dt = _code_dtype(P[n], s.N)
            pc = pc.astype(dt)
            o = offs[ch].astype(dt) if len(ch) else np.zeros((0, s.N), dtype=dt)
            cc = pc + o * P[n - 1] if s.is_padic else pc * scales[n - 1] + o
            tree.levels.append(encode(cc, P[n], s.N).astype(dt) if len(cc) else np.zeros(0, dtype=dt))
            tree.parents.append(par)
            tree.childidx.append(ch)
        for n, idx in d.get("expanded", {}).items():
            mask = np.zeros(tree.size(int(n)), dtype=bool)
            mask[np.asarray(idx, dtype=np.int64)] = True
            tree.expanded[int(n)] = mask
        for c in d.get("observed", []):
            tree.observed[(c["m"], c["n"])] = c["count"]
        for r in d.get("removals", []):
            tree.removals[(r["m"], r["n"])] = tuple(np.asarray(r[k], dtype=np.int64)
                                                    for k in ("ancestor", "parent", "child"))
        if "budgets" in d:
            tree.budgets = BudgetMatrix.from_json(d["budgets"])
        tree.empty_level = d.get("empty_level")
        tree.meta = d.get("meta", {})
        return tree

    def to_csv_rows(self) -> list[list[str]]:
        """Rows (level, lo..., hi...) with exact decimal strings; p-adic: (level, residues..., modulus)."""
        from .exact import frac_str
        rows = []
        s = self.structure
        for n in range(len(self.levels)):
            P = self.scale(n)
            cs = self.coords(n)
            if s.is_padic:
                mod0 = s.p ** self.origin.level
                for c in cs:
                    res = [(r + mod0 * int(k)) % (mod0 * P) for r, k in zip(self.origin.residues, c)]
                    rows.append([str(n)] + [str(r) for r in res] + [str(mod0 * P)])
                continue
            side = 2 * self.origin.radius / P
            lo0 = self.origin.lo()
            for c in cs:
                lo = [l + int(k) * side for l, k in zip(lo0, c)]
                hi = [x + side for x in lo]
                rows.append([str(n)] + [frac_str(x) for x in lo] + [frac_str(x) for x in hi])
        return rows


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, Fraction):
        return frac_json(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    return x


# ---------------------------------------------------------------- oracles

@dataclass
class Stage:
    """One charge stage: alive candidates at level n+1 grouped by level-m ancestor."""
    tree: CantorTree
    n: int
    m: int
    codes: np.ndarray          # alive candidate flat codes, canonical order
    position: np.ndarray       # index of each alive candidate in the full candidate array
    parent: np.ndarray         # level-n parent index of each alive candidate
    child: np.ndarray          # child index within the parent's split
    starts: np.ndarray         # group boundaries into the alive arrays (len = groups + 1)
    ancestors: np.ndarray      # level-m ancestor index per group
    limit: int | None

    @property
    def scale(self) -> int:
        return self.tree.scale(self.n + 1)

    @property
    def groups(self) -> int:
        return len(self.ancestors)

    def coords(self) -> np.ndarray:
        return decode(self.codes, self.scale, self.tree.N)

    def ball(self, i: int) -> Ball:
        t = self.tree
        c = decode(self.codes[i:i + 1], self.scale, t.N)[0]
        return Ball.from_coords(t.structure, t.origin, t.scales[:self.n + 1], tuple(int(x) for x in c))

    def ancestor_ball(self, g: int) -> Ball:
        return self.tree.ball(self.m, int(self.ancestors[g]))

    def group_of(self) -> np.ndarray:
        sizes = np.diff(self.starts)
        return np.repeat(np.arange(len(sizes)), sizes)


class Oracle:
    """Removal oracle. Subclasses override ``select`` (batch) or ``choose`` (per ancestor)."""

    name = "oracle"

    def select(self, stage: Stage) -> np.ndarray:
        out = []
        for g in range(stage.groups):
            lo, hi = int(stage.starts[g]), int(stage.starts[g + 1])
            if lo == hi:
                continue
            cands = [stage.ball(i) for i in range(lo, hi)]
            picked = self.choose(stage.n, stage.m, stage.ancestor_ball(g), cands, stage.limit)
            out.extend(lo + int(j) for j in picked)
        return np.asarray(out, dtype=np.int64)

    def choose(self, n: int, m: int, ancestor: Ball, candidates: list[Ball], limit: int | None) -> list[int]:
        return []

    def wants(self, n: int, m: int) -> bool:
        return True


class NullOracle(Oracle):
    name = "none"

    def select(self, stage):
        return np.zeros(0, dtype=np.int64)

    def wants(self, n, m):
        return False


class FunctionOracle(Oracle):
    """Wrap a plain callable (n, m, ancestor, candidates) -> indices."""

    def __init__(self, fn, name: str = "function"):
        self.fn = fn
        self.name = name

    def choose(self, n, m, ancestor, candidates, limit):
        return list(self.fn(n, m, ancestor, candidates))


class GreedyOracle(Oracle):
    """Removes the first floor(r) alive candidates under each ancestor."""
    name = "greedy"

    def select(self, stage):
        if stage.limit is None:
            raise ConfigError("the greedy oracle needs finite budgets")
        if stage.limit == 0 or len(stage.codes) == 0:
            return np.zeros(0, dtype=np.int64)
        rank = np.arange(len(stage.codes)) - np.repeat(stage.starts[:-1], np.diff(stage.starts))
        return np.flatnonzero(rank < stage.limit)


class SeededOracle(Oracle):
    """Removes a seeded-random subset of size floor(r) (or fewer) per ancestor."""
    name = "seeded"

    def __init__(self, seed: int = 0, fill: bool = True):
        self.seed = seed
        self.fill = fill

    def select(self, stage):
        if stage.limit is None:
            raise ConfigError("the seeded oracle needs finite budgets")
        rng = np.random.default_rng([self.seed, stage.n, stage.m])
        out = []
        for g in range(stage.groups):
            lo, hi = int(stage.starts[g]), int(stage.starts[g + 1])
            size = hi - lo
            k = min(stage.limit, size) if self.fill else int(rng.integers(0, min(stage.limit, size) + 1))
            if k:
                out.append(lo + np.sort(rng.choice(size, size=k, replace=False)))
        return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


class RemoveAllOracle(Oracle):
    """Removes every alive candidate (budget permitting)."""
    name = "all"

    def select(self, stage):
        return np.arange(len(stage.codes))


def make_oracle(spec, seed: int = 0) -> Oracle:
    if isinstance(spec, Oracle):
        return spec
    if callable(spec):
        return FunctionOracle(spec)
    key = str(spec or "none").lower()
    if key in ("none", "null"):
        return NullOracle()
    if key in ("greedy", "leftmost", "worst", "greedy-leftmost"):
        return GreedyOracle()
    if key in ("seeded", "random", "seeded-random"):
        return SeededOracle(seed)
    if key == "all":
        return RemoveAllOracle()
    raise ConfigError(f"unknown oracle policy {spec!r}")


class ReindexedOracle(Oracle):
    """Runs a scale-R^k oracle inside a scale-R construction.

    Only stages with k | m and k | n+1 are forwarded, translated to
    (m/k, (n+1)/k - 1); candidates are handed over in the coarse canonical
    order so that order-sensitive oracles behave identically.
    """

    def __init__(self, inner: Oracle, k: int, coarse_scales: Sequence[int]):
        self.inner = inner
        self.k = k
        self.coarse_scales = list(coarse_scales)
        self.name = f"reindexed({inner.name},{k})"

    def wants(self, n, m):
        return m % self.k == 0 and (n + 1) % self.k == 0

    def select(self, stage):
        k = self.k
        if not self.wants(stage.n, stage.m):
            return np.zeros(0, dtype=np.int64)
        n2, m2 = (stage.n + 1) // k - 1, stage.m // k
        t = stage.tree
        coarse = CantorTree(t.structure, t.origin, self.coarse_scales[:n2 + 1])
        # coarse view: levels at multiples of k
        for lev in range(0, n2 + 1):
            coarse.levels.append(t.levels[lev * k])
            coarse.parents.append(t.ancestor_index(lev * k, (lev - 1) * k, np.arange(t.size(lev * k)))
                                  if lev else np.zeros(0, dtype=np.int64))
            coarse.childidx.append(np.zeros(t.size(lev * k), dtype=np.int64))
        order = _coarse_order(t.structure, self.coarse_scales[:n2 + 1], stage)
        sub = Stage(coarse, n2, m2, stage.codes[order], stage.position[order],
                    t.ancestor_index(stage.n, n2 * k, stage.parent[order]), stage.child[order],
                    stage.starts, stage.ancestors, stage.limit)
        picked = self.inner.select(sub)
        return np.sort(order[np.asarray(picked, dtype=np.int64)])


def _coarse_order(s: SplittingStructure, scales, stage: Stage) -> np.ndarray:
    """Permutation putting each group's candidates into coarse canonical order."""
    if s.N == 1 and not s.is_padic:
        return np.arange(len(stage.codes))
    from .splitting import coords_to_address
    cs = stage.coords()
    keys = []
    for i in range(len(stage.codes)):
        addr = coords_to_address(s, scales, tuple(int(x) for x in cs[i]))
        keys.append(tuple(j for _, j in addr))
    order = []
    for g in range(stage.groups):
        lo, hi = int(stage.starts[g]), int(stage.starts[g + 1])
        order.extend(sorted(range(lo, hi), key=lambda i: keys[i]))
    return np.asarray(order, dtype=np.int64)


def reindex_oracle(oracle, k: int, coarse_scales: Sequence[int]) -> Oracle:
    return ReindexedOracle(make_oracle(oracle), k, coarse_scales)


# ---------------------------------------------------------------- construct

def _children(structure: SplittingStructure, codes: np.ndarray, P: int, u: int):
    """Flat codes of all children (parent-major canonical order) at scale P*u."""
    N = structure.N
    offs = structure.child_offsets(u)
    f = len(offs)
    Pn = P * u
    dt = _code_dtype(Pn, N)
    parent_coords = decode(codes.astype(dt), P, N)
    O = np.asarray(offs, dtype=dt).reshape(1, f, N)
    pc = parent_coords.reshape(-1, 1, N)
    cc = pc + O * P if structure.is_padic else pc * u + O
    flat = encode(cc.reshape(-1, N), Pn, N)
    return np.asarray(flat, dtype=dt), f


def _expand_mask(policy, size: int, n: int) -> np.ndarray | None:
    if policy is None or size == 0:
        return None
    if isinstance(policy, int):
        policy = ("leftmost", policy)
    kind, width = policy[0], int(policy[1])
    if width >= size:
        return None
    mask = np.zeros(size, dtype=bool)
    if kind == "leftmost":
        mask[:width] = True
    elif kind in ("seeded", "random"):
        seed = policy[2] if len(policy) > 2 else 0
        rng = np.random.default_rng([seed, n])
        mask[np.sort(rng.choice(size, size=width, replace=False))] = True
    else:
        raise ConfigError(f"unknown expansion policy {kind!r}")
    return mask


def construct(B: Ball, scales, budgets: BudgetMatrix | None, oracle, depth: int, expand=None,
              threads: int = 1, meta: dict | None = None) -> CantorTree:
    """Build a Cantor tree to `depth` levels.

    `scales` is a single R or a sequence R_0, R_1, ... (the last value repeats).
    With ``budgets=None`` the oracle is unconstrained and the tree records the
    observed per-cell maxima. ``expand`` optionally limits how many survivors
    per level are split further: an int width, ("leftmost", w) or
    ("seeded", w, seed), or a callable (tree, n) -> boolean mask over level n.
    Unexpanded survivors are reported by ``frontier``.
    """
    s = B.structure
    if isinstance(scales, int):
        scales = [scales] * depth
    scales = list(scales)
    if len(scales) < depth:
        if not scales:
            raise ConfigError("no scales given")
        scales += [scales[-1]] * (depth - len(scales))
    scales = scales[:depth]
    for u in scales:
        s.exponent(u)
    if B.address:
        raise ConfigError("construct expects a root ball (build from its origin)")
    oracle = make_oracle(oracle)
    tree = CantorTree(s, B.origin, scales, budgets=budgets, meta=dict(meta or {}))
    tree.meta.setdefault("oracle", oracle.name)
    tree.levels.append(np.zeros(1, dtype=np.int64))
    tree.parents.append(np.zeros(0, dtype=np.int64))
    tree.childidx.append(np.zeros(0, dtype=np.int64))
    P = _scale_products(scales)
    for n in range(depth):
        u = scales[n]
        cur = tree.levels[n]
        mask = expand(tree, n) if callable(expand) else _expand_mask(expand, len(cur), n)
        if mask is not None and mask.all():
            mask = None
        if mask is not None:
            tree.expanded[n] = mask
            src = np.flatnonzero(mask)
        else:
            src = np.arange(len(cur))
        cands, f = _children(s, cur[src], P[n], u)
        par = np.repeat(src, f)
        child = np.tile(np.arange(f), len(src))
        alive = np.ones(len(cands), dtype=bool)
        for m in range(n, -1, -1):
            if budgets is not None:
                limit = budgets.floor(m, n)
                if limit == 0:
                    continue
            else:
                limit = None
            if not oracle.wants(n, m):
                continue
            pos = np.flatnonzero(alive)
            if len(pos) == 0:
                break
            anc_all = tree.ancestor_index(n, m, par[pos])
            # runs of equal ancestors are contiguous in canonical order
            brk = np.flatnonzero(np.diff(anc_all)) + 1
            starts = np.concatenate(([0], brk, [len(pos)]))
            stage = Stage(tree, n, m, cands[pos], pos, par[pos], child[pos], starts,
                          anc_all[starts[:-1]], limit)
            picked = np.asarray(oracle.select(stage), dtype=np.int64)
            if len(picked) == 0:
                continue
            picked = np.unique(picked)
            if picked[0] < 0 or picked[-1] >= len(pos):
                raise BudgetExceeded(f"oracle returned a non-candidate at stage (m={m}, n={n})")
            grp = np.searchsorted(starts, picked, side="right") - 1
            counts = np.bincount(grp, minlength=len(starts) - 1)
            worst = int(counts.max())
            if limit is not None and worst > limit:
                g = int(np.argmax(counts))
                raise BudgetExceeded(
                    f"oracle removed {worst} balls under ancestor {int(stage.ancestors[g])} at level {m} "
                    f"in stage (m={m}, n={n}); the budget allows {limit}")
            tree.observed[(m, n)] = max(tree.observed.get((m, n), 0), worst)
            full = pos[picked]
            alive[full] = False
            tree.removals[(m, n)] = (stage.ancestors[grp], par[full], child[full])
        keep = np.flatnonzero(alive)
        tree.levels.append(cands[keep])
        tree.parents.append(par[keep])
        tree.childidx.append(child[keep])
        if len(keep) == 0:
            tree.empty_level = n + 1
            for lev in range(n + 1, depth):
                tree.levels.append(np.zeros(0, dtype=cands.dtype))
                tree.parents.append(np.zeros(0, dtype=np.int64))
                tree.childidx.append(np.zeros(0, dtype=np.int64))
            break
    return tree


def budget_compliance(tree: CantorTree, budgets: BudgetMatrix) -> dict:
    """Re-scan the removal log against budgets; report the worst cell."""
    worst = None
    ok = True
    for (m, n), per_anc in tree.removal_counts().items():
        cap = budgets.floor(m, n)
        top = max(per_anc.values())
        if top > cap:
            ok = False
        if worst is None or top - cap > worst[2] - worst[3]:
            worst = (m, n, top, cap)
    return {"pass": ok, "worst": None if worst is None else
            {"m": worst[0], "n": worst[1], "count": worst[2], "cap": worst[3]}}


def region_set(tree: CantorTree, n: int) -> set:
    """Survivors at level n as a set of (scale, coordinate tuple) regions."""
    P = tree.scale(n)
    return {(P, tuple(int(x) for x in c)) for c in tree.coords(n)}


# ---------------------------------------------------------------- greedy DAG

def greedy_count(f_values, budget_floor, depth: int) -> list[int]:
    """Exact level sizes of the leftmost-greedy tree, without materializing it.

    The tree is kept as a hash-consed DAG of child lists. The greedy oracle
    only ever removes the first k alive leaves below a node, so identical
    subtrees stay identical after each stage and the DAG stays small.
    ``budget_floor(m, n)`` gives the integer cap of cell (m, n).
    """
    fv = _fvals(f_values, depth)
    nodes: list[tuple] = [()]
    intern = {(): 0}
    cnt: dict = {}

    def mk(ch) -> int:
        t = tuple(ch)
        i = intern.get(t)
        if i is None:
            i = len(nodes)
            nodes.append(t)
            intern[t] = i
        return i

    def count(i, h):
        if h == 0:
            return 1
        key = (i, h)
        v = cnt.get(key)
        if v is None:
            v = 0
            for c in nodes[i]:
                v += count(c, h - 1)
            cnt[key] = v
        return v

    def expand(i, h, f, memo):
        key = (i, h)
        r = memo.get(key)
        if r is None:
            r = mk([0] * f) if h == 0 else mk([expand(c, h - 1, f, memo) for c in nodes[i]])
            memo[key] = r
        return r

    def trim(i, h, k, memo):
        if k <= 0:
            return i
        key = (i, h, k)
        r = memo.get(key)
        if r is not None:
            return r
        out = []
        rem = k
        for c in nodes[i]:
            if rem <= 0:
                out.append(c)
                continue
            cc = count(c, h - 1)
            if rem >= cc:
                rem -= cc
                continue
            out.append(trim(c, h - 1, rem, memo))
            rem = 0
        r = mk(out)
        memo[key] = r
        return r

    def apply(i, d, m, h, k, memo, tmemo):
        key = (i, d)
        r = memo.get(key)
        if r is None:
            r = trim(i, h, k, tmemo) if d == m else mk([apply(c, d + 1, m, h - 1, k, memo, tmemo) for c in nodes[i]])
            memo[key] = r
        return r

    root = 0
    sizes = [1]
    for n in range(depth):
        root = expand(root, n, fv[n], {})
        for m in range(n, -1, -1):
            k = budget_floor(m, n)
            if k > 0:
                root = apply(root, 0, m, n + 1, k, {}, {})
        sizes.append(count(root, n + 1))
        if sizes[-1] == 0:
            sizes += [0] * (depth - n - 1)
            break
    return sizes


# ---------------------------------------------------------------- dimension

def _log_iv(x):
    return iv.log(iv_of(Fraction(x)))


def dim_lower_bound(structure: SplittingStructure, scales, budgets: BudgetMatrix, depth: int,
                    delta=Fraction(1, 100), horizon: int | None = None, prec: int = 128) -> dict:
    """Check the three hypotheses of the dimension bound at levels n <= depth.

    Returns s = min_n (dim A_inf - log_{R_n} 2) together with per-condition
    results. ``n_delta`` is the last level at which the product condition
    fails within the horizon; the condition is required for n > n_delta.
    The budget-sum condition is checked exactly; when it fails, the local
    route (r_{m,n} = 0 off the diagonal and r_{n,n} <= f(R_n)/2) is tried,
    which gives the same conclusion directly.
    """
    delta = to_fraction(delta)
    if isinstance(scales, int):
        scales = [scales]
    scales = list(scales)
    constant = len(set(scales)) == 1
    if horizon is None:
        horizon = max(depth, 1000) if constant else depth
    R = (scales + [scales[-1]] * (horizon + 1))[:horizon + 1]
    fv = [structure.f(u) for u in R]
    d = Fraction(structure.dim_exact()) if structure.dim_exact() is not None else None

    f_ok = all(f >= 4 for f in fv[:depth + 1])
    first_bad_f = next((n for n, f in enumerate(fv[:depth + 1]) if f < 4), None)

    with ivprec(prec):
        dim_iv = iv_of(d) if d is not None else _log_iv(structure.f(structure.base)) / _log_iv(structure.base)
        svals = [dim_iv - iv.log(iv.mpf(2)) / _log_iv(u) for u in R[:depth + 1]]
        s_lo = min(iv_bounds(v)[0] for v in svals)
        s_hi = min(iv_bounds(v)[1] for v in svals)
        s_mid = (s_lo + s_hi) / 2
        s_iv = iv.mpf([iv_of(s_lo).a, iv_of(s_hi).b])
        # product condition: sum_{i<=n} delta log R_i  >  s log R_n
        n_delta = -1
        acc = iv.mpf(0)
        ambiguous = []
        for n in range(horizon + 1):
            acc += iv_of(delta) * _log_iv(R[n])
            diff = acc - s_iv * _log_iv(R[n])
            lo, hi = iv_bounds(diff)
            if hi <= 0:
                n_delta = n
            elif lo <= 0:
                # undecided within interval width: treat as failing, record
                n_delta = n
                ambiguous.append(n)
        ineq_ok = n_delta < horizon

    # budget-sum condition, exact rational arithmetic on upper bounds
    cond_rows = []
    cond_ok = True
    for n in range(depth + 1):
        total = Fraction(0)
        prod = Fraction(1)
        for k in range(n + 1):
            if k:
                prod *= Fraction(4, fv[n - k])
            r = budgets.upper(n - k, n)
            if r:
                total += r * prod
        ok = total <= Fraction(fv[n], 4)
        cond_ok &= ok
        cond_rows.append({"n": n, "lhs": total, "rhs": Fraction(fv[n], 4), "pass": ok})

    local_ok = all(budgets.upper(m, n) == 0 for n in range(depth + 1) for m in range(n)) and \
        all(2 * budgets.upper(n, n) <= fv[n] for n in range(depth + 1))
    certified = f_ok and ineq_ok and (cond_ok or local_ok)
    return {
        "s": float(s_mid),
        "s_bounds": (s_lo, s_hi),
        "s_exact": _s_exact(structure, R[:depth + 1]),
        "certified": certified,
        "conditions": {
            "f_at_least_4": {"pass": f_ok, "first_failure": first_bad_f},
            "product_inequality": {"pass": ineq_ok, "delta": delta, "n_delta": n_delta,
                                   "horizon": horizon, "undecided": ambiguous},
            "budget_sum": {"pass": cond_ok, "rows": cond_rows},
            "local_route": {"pass": local_ok},
        },
    }


def _s_exact(structure, R) -> Fraction | None:
    """Exact s when every dim - log_{R_n} 2 is rational (R_n a power of 2, rational dim)."""
    d = structure.dim_exact()
    if d is None:
        return None
    best = None
    for u in R:
        e = 0
        v = u
        while v % 2 == 0:
            v //= 2
            e += 1
        if v != 1:
            return None
        val = d - Fraction(1, e)
        best = val if best is None else min(best, val)
    return best


# ---------------------------------------------------------------- measure

@dataclass
class MeasureAssignment:
    tree: CantorTree
    denominators: list            # per level: weight of survivor i is 1 / D[i]

    def weight(self, n: int, i: int) -> Fraction:
        return Fraction(1, int(self.denominators[n][i]))

    def level_sum(self, n: int) -> Fraction:
        vals, cnts = np.unique(np.asarray(self.denominators[n], dtype=object).astype(object), return_counts=True) \
            if self.denominators[n].dtype == object else np.unique(self.denominators[n], return_counts=True)
        total = Fraction(0)
        for v, c in zip(vals.tolist(), cnts.tolist()):
            total += Fraction(int(c), int(v))
        return total

    def max_weight(self, n: int) -> Fraction:
        return Fraction(1, int(min(self.denominators[n].tolist())))

    def ball_mass_check(self, t: Sequence[Fraction] | None = None) -> dict:
        """mu(B_n) <= prod_{i<n} 1/t_i, with t_i = f(R_i) - s_i for local trees."""
        tree = self.tree
        if t is None:
            fv = tree.f_values()
            s = tree.s_values()
            if tree.budgets is not None and tree.budgets.is_local(max(tree.depth - 1, 0)):
                s = [tree.budgets.upper(n, n) for n in range(tree.depth)]
            t = [Fraction(f) - sv for f, sv in zip(fv, s)]
        rows = []
        ok = True
        prod = Fraction(1)
        for n in range(tree.depth + 1):
            if n:
                prod *= t[n - 1]
            if prod <= 0:
                rows.append({"n": n, "pass": False, "reason": "non-positive t"})
                ok = False
                continue
            dmin = int(min(self.denominators[n].tolist()))
            good = Fraction(dmin) >= prod
            ok &= good
            rows.append({"n": n, "max_weight": Fraction(1, dmin), "bound": 1 / prod, "pass": good})
        return {"pass": ok, "t": list(t), "rows": rows}


def canonical_measure(tree: CantorTree) -> MeasureAssignment:
    """Weights: root 1, each survivor gets its parent's weight split evenly among siblings."""
    if tree.empty_level is not None:
        raise EmptyLevel(f"level {tree.empty_level} is empty")
    if tree.has_frontier:
        raise ConfigError("the canonical measure needs a fully expanded tree")
    dens = [np.ones(1, dtype=np.int64)]
    for n in range(tree.depth):
        par = tree.parents[n + 1]
        kids = np.bincount(par, minlength=tree.size(n))
        if (kids[np.unique(par)] == 0).any() or len(np.unique(par)) != tree.size(n):
            raise EmptyLevel(f"a level-{n} survivor has no surviving children")
        prev = dens[-1]
        big = prev.dtype == object or int(prev.max()) * int(kids.max()) >= _INT64_LIMIT
        if big:
            d = np.asarray([int(prev[p]) * int(kids[p]) for p in par.tolist()], dtype=object)
        else:
            d = prev[par] * kids[par]
        dens.append(d)
    return MeasureAssignment(tree, dens)


def _rational_bounds(s):
    """Accept a Fraction, a (lo, hi) pair, or anything with .bounds(prec)."""
    if isinstance(s, tuple):
        return Fraction(s[0]), Fraction(s[1])
    if hasattr(s, "bounds"):
        return s.bounds(128)
    s = to_fraction(s)
    return s, s


def mdp_constants(tree: CantorTree, s, delta=Fraction(1, 100), t: Sequence | None = None,
                  horizon: int = 1000, prec: int = 128) -> dict:
    """C(X), C1(delta), C2 as assembled for the local measure bound."""
    delta = to_fraction(delta)
    s_lo, s_hi = _rational_bounds(s)
    R = list(tree.scales) or [1]
    R = (R + [R[-1]] * (horizon + 1))[:horizon + 1]
    if t is None:
        fv = tree.f_values()
        sv = tree.s_values()
        t = [Fraction(f) - x for f, x in zip(fv, sv)]
    rad = tree.origin.rad(tree.structure.p)
    with ivprec(prec):
        s_iv = iv.mpf([iv_of(s_lo).a, iv_of(s_hi).b])
        # n(delta): last n with prod_{i<=n} R_i^delta <= R_n^s
        n_delta = 0
        acc = iv.mpf(0)
        for n in range(horizon + 1):
            acc += iv_of(delta) * _log_iv(R[n])
            if iv_bounds(acc - s_iv * _log_iv(R[n]))[0] <= 0:
                n_delta = n
        c1max = iv.mpf(1)
        acc = iv.mpf(0)
        for j in range(0, n_delta + 1):
            acc += iv_of(delta) * _log_iv(R[j])
            if j >= 1:
                v = iv.exp(acc - s_iv * _log_iv(R[j]))
                c1max = iv.mpf([max(c1max.a, v.a), max(c1max.b, v.b)])
        C1 = iv.exp((iv_of(delta) - s_iv) * _log_iv(rad)) * c1max
        # n0: last level where R_n^s > t_n
        n0 = 0
        for n in range(len(t)):
            if t[n] <= 0 or iv_bounds(s_iv * _log_iv(R[n]) - _log_iv(t[n]))[1] > 0:
                n0 = n
        c2max = iv.mpf(1)
        acc = iv.mpf(0)
        for j in range(0, min(n0, len(t) - 1) + 1):
            if t[j] <= 0:
                break
            acc += s_iv * _log_iv(R[j]) - _log_iv(t[j])
            if j >= 1:
                v = iv.exp(acc)
                c2max = iv.mpf([max(c2max.a, v.a), max(c2max.b, v.b)])
        CX = tree.structure.packing_constant
        return {"C_X": CX, "C1": iv_bounds(C1), "C2": iv_bounds(c2max), "n_delta": n_delta, "n0": n0,
                "delta": delta, "s": (s_lo, s_hi)}


def _meets_interval(lo_arr, hi_arr, a, b):
    return (lo_arr <= b) & (a <= hi_arr)


def mdp_check(measure: MeasureAssignment, tree: CantorTree, s, samples: int = 200, seed: int = 0,
              delta=Fraction(1, 100), intervals: Sequence | None = None, prec: int = 128) -> dict:
    """Mass-distribution check on test sets E (intervals or boxes, given by (lo, hi) corners).

    For each E the comparable level m is found by bracketing rad(E) between
    consecutive level radii; mu(E) is bounded by the total weight of level-m
    survivors meeting E, and compared with C(X) C1 C2 rad(E)^(s-delta). The
    report also gives the largest observed mu(E)/diam(E)^s, where mu(E) is
    bounded using the deepest level.
    """
    s_struct = tree.structure
    if s_struct.is_padic:
        raise ConfigError("mdp_check works on real structures")
    N = s_struct.N
    delta = to_fraction(delta)
    consts = mdp_constants(tree, s, delta, prec=prec)
    s_lo, s_hi = consts["s"]
    rad0 = tree.origin.radius
    lo0 = tree.origin.lo()
    if intervals is None:
        rng = np.random.default_rng(seed)
        denom = 1 << 20
        intervals = []
        for _ in range(samples):
            a = [Fraction(int(rng.integers(0, denom)), denom) for _ in range(N)]
            w = Fraction(int(rng.integers(1, denom)), denom)
            lo = tuple(l + 2 * rad0 * x for l, x in zip(lo0, a))
            intervals.append((lo, tuple(x + 2 * rad0 * w * (1 - ai) for x, ai in zip(lo, a))))
    intervals = [((tuple(e[0]) if isinstance(e[0], (tuple, list)) else (e[0],)),
                  (tuple(e[1]) if isinstance(e[1], (tuple, list)) else (e[1],))) for e in intervals]

    # per-level survivor boxes in integer grid units; weights as floats only for reporting
    levels = []
    for n in range(tree.depth + 1):
        P = tree.scale(n)
        levels.append((P, tree.coords(n)))

    radii = [rad0 / tree.scale(n) for n in range(tree.depth + 1)]
    worst_ratio = None
    worst_E = None
    fails = []
    beyond = 0
    with ivprec(prec):
        s_iv = iv.mpf([iv_of(s_lo).a, iv_of(s_hi).b])
        CXC = iv.mpf(consts["C_X"]) * iv.mpf([iv_of(consts["C1"][0]).a, iv_of(consts["C1"][1]).b]) * \
            iv.mpf([iv_of(consts["C2"][0]).a, iv_of(consts["C2"][1]).b])
        for lo, hi in intervals:
            diam = max(b - a for a, b in zip(lo, hi))
            if diam <= 0:
                continue
            radE = diam / 2
            if radE > rad0:
                continue
            # m with radii[m+1] < radE <= radii[m]
            m = 0
            while m + 1 < len(radii) and radii[m + 1] >= radE:
                m += 1
            deep = tree.depth
            mu_m = _mass_meeting(measure, levels, tree, m, lo, hi, lo0, rad0)
            mu_deep = _mass_meeting(measure, levels, tree, deep, lo, hi, lo0, rad0)
            ratio = iv_of(mu_deep) / iv.exp(s_iv * _log_iv(diam))
            r_hi = iv_bounds(ratio)[1]
            if worst_ratio is None or r_hi > worst_ratio:
                worst_ratio, worst_E = r_hi, (lo, hi)
            if m + 1 >= len(radii) and radE <= radii[-1]:
                beyond += 1
                continue
            bound = CXC * iv.exp((s_iv - iv_of(delta)) * _log_iv(radE))
            b_lo = iv_bounds(bound)[0]
            if mu_m > b_lo:
                fails.append({"E": (lo, hi), "mu_upper": mu_m, "bound": b_lo})
    return {
        "pass": not fails,
        "tested": len(intervals),
        "beyond_depth": beyond,
        "max_ratio": float(worst_ratio) if worst_ratio is not None else 0.0,
        "max_ratio_upper": worst_ratio,
        "worst_E": worst_E,
        "constants": consts,
        "failures": fails[:20],
    }


def _mass_meeting(measure, levels, tree, n, lo, hi, lo0, rad0) -> Fraction:
    """Total weight of level-n survivors whose closed box meets the box [lo, hi]."""
    P, cs = levels[n]
    side = 2 * rad0 / P
    mask = np.ones(len(cs), dtype=bool)
    for d in range(tree.N):
        # survivor k covers [lo0 + k side, lo0 + (k+1) side]; meets [a, b] iff k <= (b-lo0)/side and k+1 >= (a-lo0)/side
        kmax = math.floor((hi[d] - lo0[d]) / side)
        kmin = math.ceil((lo[d] - lo0[d]) / side) - 1
        col = cs[:, d]
        mask &= (col >= kmin) & (col <= kmax)
    idx = np.flatnonzero(mask)
    if len(idx) == 0:
        return Fraction(0)
    dens = measure.denominators[n][idx]
    vals, cnts = np.unique(dens, return_counts=True)
    return sum((Fraction(int(c), int(v)) for v, c in zip(vals.tolist(), cnts.tolist())), Fraction(0))


# ---------------------------------------------------------------- trimming

def local_trim(tree: CantorTree) -> CantorTree:
    """Prune bottom-up so every kept ball keeps at least f(R_n)/2 children.

    At the deepest level all survivors are kept. A ball at level n < depth is
    kept when at least half of its f(R_n) children are kept. The result is a
    local tree whose removals are charged to the diagonal cells, with
    s_n = f(R_n)/2 as the budget.
    """
    if tree.empty_level is not None:
        raise TrimCollapse(f"level {tree.empty_level} is already empty")
    if tree.has_frontier:
        raise ConfigError("local_trim needs a fully expanded tree")
    D = tree.depth
    fv = tree.f_values()
    keep = [None] * (D + 1)
    keep[D] = np.ones(tree.size(D), dtype=bool)
    for n in range(D - 1, -1, -1):
        par = tree.parents[n + 1][keep[n + 1]]
        kept_kids = np.bincount(par, minlength=tree.size(n))
        keep[n] = 2 * kept_kids >= fv[n]
    if not keep[0][0]:
        raise TrimCollapse("the root is discarded by the local trim")
    # top-down: a ball survives only if its parent survives
    for n in range(1, D + 1):
        keep[n] &= keep[n - 1][tree.parents[n]]
    out = CantorTree(tree.structure, tree.origin, list(tree.scales),
                     budgets=BudgetMatrix.local([Fraction(f, 2) for f in fv]),
                     meta=dict(tree.meta, trimmed=True))
    new_index = []
    for n in range(D + 1):
        idx = np.flatnonzero(keep[n])
        remap = np.full(tree.size(n), -1, dtype=np.int64)
        remap[idx] = np.arange(len(idx))
        new_index.append(remap)
        out.levels.append(tree.levels[n][idx])
        out.parents.append(new_index[n - 1][tree.parents[n][idx]] if n else np.zeros(0, dtype=np.int64))
        out.childidx.append(tree.childidx[n][idx] if n else np.zeros(0, dtype=np.int64))
    # removal log: each kept parent lost every child that is not kept
    for n in range(D):
        f = fv[n]
        kept_par = out.parents[n + 1]
        kept_ch = out.childidx[n + 1]
        present = np.zeros((out.size(n), f), dtype=bool)
        present[kept_par, kept_ch] = True
        rp, rc = np.nonzero(~present)
        out.removals[(n, n)] = (rp, rp, rc)
        counts = np.bincount(rp, minlength=out.size(n))
        out.observed[(n, n)] = int(counts.max()) if len(counts) else 0
        if out.observed[(n, n)] * 2 > f:
            raise InvariantBreach("trimmed tree violates the half-children rule")
    return out


# ---------------------------------------------------------------- Cantor-winning

def _precondition_t(fR: Fraction, gap: Fraction, depth: int) -> int | None:
    """Smallest t in the checked range with t > fR^(t*gap), or None."""
    a, b = gap.numerator, gap.denominator
    ln = math.log(float(fR)) if fR > 1 else 0.0
    if ln == 0:
        return 1
    top = max(depth + 1, math.ceil(1 / (float(gap) * ln)) + 2)
    for t in range(1, top + 1):
        # t <= fR^(t a / b)  <=>  t^b <= fR^(t a)
        if Fraction(t) ** b > fR ** (t * a):
            return t
    return None


def cantor_winning_combine(eps0, eps, fR, ks: Sequence[int], count: int | None = None,
                           depth: int = 10) -> tuple[BudgetMatrix, dict]:
    """Combine Cantor-winning witnesses at scales R^{k_i} into one budget at scale R.

    Each witness has r_{m,n} = f(R)^{k_i (n-m+1)(1-eps)} at scale R^{k_i}; it is
    re-indexed to scale R and the results are summed. The certificate checks
    every cell up to `depth` against f(R)^{(n-m+1)(1-(2 eps - eps0))}.
    """
    eps0, eps, fR = to_fraction(eps0), to_fraction(eps), to_fraction(fR)
    ks = [int(k) for k in ks]
    if count is None:
        count = len(ks)
    ks = ks[:count]
    if len(ks) < count:
        raise ConfigError("fewer scales than witnesses")
    if any(b <= a for a, b in zip(ks, ks[1:])) or (ks and ks[0] < 1):
        raise ConfigError("scale exponents must be positive and strictly increasing")
    if count == 1:
        target_eps = eps
        b = BudgetMatrix.cantor_winning(fR ** ks[0], eps, depth)
        comb = reindex_power(b, ks[0]) if ks[0] != 1 else b
    else:
        if not eps0 / 2 < eps < eps0:
            raise ConfigError("epsilon must lie strictly between eps0/2 and eps0")
        bad = _precondition_t(fR, eps0 - eps, depth)
        if bad is not None:
            raise PreconditionREps(f"t <= f(R)^(t(eps0-eps)) fails at t = {bad}")
        target_eps = 2 * eps - eps0
        parts = []
        for k in ks:
            w = BudgetMatrix.cantor_winning(fR ** k, eps, depth // k + 1)
            parts.append(reindex_power(w, k))
        comb = intersect_budgets(parts)
        comb.depth = depth
    rows = []
    ok = True
    worst = None
    for n in range(depth + 1):
        for m in range(n + 1):
            hi = comb.upper(m, n)
            tlo, thi = power_bounds(fR, (n - m + 1) * (1 - target_eps))
            if hi == 0:
                continue
            good = hi <= tlo or (count == 1 and hi == thi)
            ok &= good
            margin = tlo - hi
            if worst is None or margin < worst[2]:
                worst = (m, n, margin)
            rows.append({"m": m, "n": n, "cell": hi, "target": tlo, "pass": good})
    cert = {"pass": ok, "certificate_eps": target_eps, "count": count, "ks": ks, "depth": depth,
            "cells_checked": len(rows), "worst": None if worst is None else
            {"m": worst[0], "n": worst[1], "margin": worst[2]}, "rows": rows}
    return comb, cert
