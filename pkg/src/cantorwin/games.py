"""Absolute games, hyperplane (HAW) variants, and strategy-to-Cantor compilation.

Bob plays balls of the splitting structure. Alice deletes a closed region:
a ball of radius s (k = 0) or the closed sup-norm neighbourhood of radius s
of an affine hyperplane (k = N - 1). The referee checks every move exactly.
Strategies are positional: a function from Bob's current ball to a move.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Callable, Sequence

import numpy as np

from .cantor_engine import CantorTree, Oracle, Stage, construct
from .errors import (ConfigError, IllegalRadius, IntersectsRemoved, LegalityBreach, NotContained, Stuck)
from .exact import frac_json, frac_from_json, padic_abs, padic_residue, to_fraction
from .splitting import Ball, SplittingStructure


# ---------------------------------------------------------------- moves and regions

@dataclass(frozen=True)
class Hyperplane:
    """{x : normal . x = offset}."""
    normal: tuple
    offset: Fraction

    @classmethod
    def of(cls, normal, offset) -> "Hyperplane":
        a = tuple(to_fraction(v) for v in normal)
        if not any(a):
            raise ConfigError("hyperplane normal must be nonzero")
        return cls(a, to_fraction(offset))

    def to_json(self):
        return {"normal": [frac_json(v) for v in self.normal], "offset": frac_json(self.offset)}


@dataclass(frozen=True)
class AliceMove:
    """A closed region: ball(center, radius) or slab(hyperplane, radius)."""
    kind: str                      # "ball" | "slab"
    radius: Fraction
    center: tuple | None = None
    plane: Hyperplane | None = None

    @classmethod
    def ball(cls, center, radius) -> "AliceMove":
        c = center if isinstance(center, (tuple, list)) else (center,)
        return cls("ball", to_fraction(radius), tuple(to_fraction(v) for v in c))

    @classmethod
    def slab(cls, plane: Hyperplane, radius) -> "AliceMove":
        return cls("slab", to_fraction(radius), plane=plane)

    def to_json(self):
        d = {"kind": self.kind, "radius": frac_json(self.radius)}
        if self.kind == "ball":
            d["center"] = [frac_json(v) for v in self.center]
        else:
            d.update(self.plane.to_json())
        return d

    @classmethod
    def from_json(cls, d):
        if d["kind"] == "ball":
            return cls.ball([frac_from_json(v) for v in d["center"]], frac_from_json(d["radius"]))
        return cls.slab(Hyperplane.of([frac_from_json(v) for v in d["normal"]], frac_from_json(d["offset"])),
                        frac_from_json(d["radius"]))


def _l1(a) -> Fraction:
    return sum(abs(v) for v in a)


def region_meets_box(move: AliceMove, lo: Sequence, hi: Sequence) -> bool:
    """Exact test: closed region meets the closed box [lo, hi]."""
    if move.kind == "ball":
        d = Fraction(0)
        for z, a, b in zip(move.center, lo, hi):
            if z < a:
                d = max(d, a - z)
            elif z > b:
                d = max(d, z - b)
        return d <= move.radius
    a = move.plane.normal
    z = [(x + y) / 2 for x, y in zip(lo, hi)]
    r = [(y - x) / 2 for x, y in zip(lo, hi)]
    dot = sum(ai * zi for ai, zi in zip(a, z))
    spread = sum(abs(ai) * ri for ai, ri in zip(a, r))
    return abs(dot - move.plane.offset) <= spread + move.radius * _l1(a)


def region_meets_padic(move: AliceMove, residue: int, modulus: int, p: int) -> bool:
    if move.kind != "ball":
        raise ConfigError("hyperplane moves are only defined on real spaces")
    x = move.center[0]
    if padic_residue(x, p, 0) != 0:
        return False
    diff = x - residue
    dist = padic_abs(diff, p)
    return dist <= max(move.radius, Fraction(1, modulus))


def region_meets_ball(move: AliceMove, b: Ball) -> bool:
    if b.structure.is_padic:
        return region_meets_padic(move, b.residues[0], b.modulus, b.structure.p)
    lo, hi = b.bounds
    return region_meets_box(move, lo, hi)


def region_inside_ball(move: AliceMove, b: Ball) -> bool:
    """The ball region lies in b (used by the Schmidt referee)."""
    if move.kind != "ball":
        return False
    if b.structure.is_padic:
        return b.contains_point(move.center[0]) and move.radius <= b.rad
    lo, hi = b.bounds
    return all(a <= z - move.radius and z + move.radius <= c for z, a, c in zip(move.center, lo, hi))


def ball_inside_region(b: Ball, move: AliceMove) -> bool:
    if move.kind != "ball":
        return False
    if b.structure.is_padic:
        return padic_abs(move.center[0] - b.residues[0], b.structure.p) <= move.radius and b.rad <= move.radius
    lo, hi = b.bounds
    return all(z - move.radius <= a and c <= z + move.radius for z, a, c in zip(move.center, lo, hi))


# ---------------------------------------------------------------- configuration

@lru_cache(maxsize=64)
def gamma_default(structure: SplittingStructure) -> Fraction:
    """c/5 with c = 1/u0, u0 the smallest scale with f(u0) > C(X)."""
    return Fraction(1, 5 * structure.u0())


def gamma_of(structure: SplittingStructure) -> Fraction:
    """Admissible bound for beta: c/5, raised to 1/3 on Euclidean boxes."""
    g = gamma_default(structure)
    if structure.kind == "euclidean_box":
        return max(g, Fraction(1, 3))
    return g


@dataclass
class GameConfig:
    structure: SplittingStructure
    beta: Fraction
    k: int = 0
    gamma: Fraction | None = None
    mode: str = "absolute"           # or "schmidt"
    alpha: Fraction | None = None

    def __post_init__(self):
        self.beta = to_fraction(self.beta)
        if self.gamma is None:
            self.gamma = gamma_of(self.structure)
        else:
            self.gamma = to_fraction(self.gamma)
        if self.mode not in ("absolute", "schmidt"):
            raise ConfigError(f"unknown game mode {self.mode!r}")
        if self.mode == "schmidt":
            if self.alpha is None:
                raise ConfigError("the Schmidt game needs alpha")
            self.alpha = to_fraction(self.alpha)
            if not (0 < self.alpha < 1 and 0 < self.beta < 1):
                raise ConfigError("alpha and beta must lie in (0, 1)")
        elif not (0 < self.beta < self.gamma):
            raise ConfigError(f"beta = {self.beta} must lie in (0, {self.gamma})")
        N = self.structure.N
        if self.k not in (0, N - 1):
            raise ConfigError(f"k = {self.k} is not supported (use 0 or N-1 = {N - 1})")
        if self.k > 0 and self.structure.kind != "euclidean_box":
            raise ConfigError("hyperplane games need a Euclidean box structure")

    @property
    def bob_scale(self) -> int:
        """Largest represented u <= 1/beta, so that Bob's radius rad/u is legal."""
        lim = math.floor(1 / self.beta if self.mode == "absolute" else 1 / (self.alpha * self.beta))
        us = self.structure.scales(lim)
        if not us:
            raise Stuck(f"no represented scale u <= {lim}")
        return us[-1]

    def to_json(self):
        d = {"structure": self.structure.to_json(), "beta": frac_json(self.beta), "k": self.k,
             "gamma": frac_json(self.gamma), "mode": self.mode}
        if self.alpha is not None:
            d["alpha"] = frac_json(self.alpha)
        return d


# ---------------------------------------------------------------- strategies

class AliceStrategy:
    """Positional strategy: move(ball, beta) -> AliceMove."""
    name = "strategy"

    def __call__(self, ball: Ball, beta: Fraction) -> AliceMove:
        raise NotImplementedError

    def to_json(self):
        return {"strategy": self.name}


class CenterStrategy(AliceStrategy):
    """Degenerate move at the center (a hyperplane through it when k >= 1)."""
    name = "center"

    def to_json(self):
        return {"strategy": self.name, "k": self.k}

    def __init__(self, k: int = 0, normal=None):
        self.k = k
        self.normal = normal

    def __call__(self, ball, beta):
        s = beta * ball.rad
        if self.k == 0:
            c = ball.center if not ball.structure.is_padic else tuple(Fraction(r) for r in ball.residues)
            return AliceMove.ball(c, s)
        a = self.normal or (1,) + (0,) * (ball.structure.N - 1)
        z = ball.center
        return AliceMove.slab(Hyperplane.of(a, sum(Fraction(ai) * zi for ai, zi in zip(a, z))), s)


def target_meets(target, ball: Ball) -> bool:
    if isinstance(target, Hyperplane):
        lo, hi = ball.bounds
        return region_meets_box(AliceMove.slab(target, 0), lo, hi)
    return ball.contains_point(target)


class AvoidCountable(AliceStrategy):
    """Delete the lowest-index target meeting Bob's ball, else play the center move."""
    name = "avoid"

    def __init__(self, targets: Sequence, k: int = 0):
        self.targets = [t if isinstance(t, Hyperplane) else
                        tuple(to_fraction(v) for v in (t if isinstance(t, (tuple, list)) else (t,)))
                        for t in targets]
        self.k = k
        self.fallback = CenterStrategy(k)

    def __call__(self, ball, beta):
        s = beta * ball.rad
        for t in self.targets:
            if target_meets(t, ball):
                if isinstance(t, Hyperplane):
                    return AliceMove.slab(t, s)
                return AliceMove.ball(t, s)
        return self.fallback(ball, beta)

    def to_json(self):
        return {"strategy": self.name, "k": self.k, "targets": [t.to_json() if isinstance(t, Hyperplane) else
                                                  [frac_json(v) for v in t] for t in self.targets]}


class ScaledStrategy(AliceStrategy):
    """Wraps a strategy and inflates its radius (an illegal plug-in for tests)."""
    name = "scaled"

    def __init__(self, inner: AliceStrategy, factor):
        self.inner = inner
        self.factor = to_fraction(factor)

    def __call__(self, ball, beta):
        m = self.inner(ball, beta)
        return AliceMove(m.kind, m.radius * self.factor, m.center, m.plane)

    def to_json(self):
        return {"strategy": self.name, "factor": frac_json(self.factor), "inner": self.inner.to_json()}


class FunctionStrategy(AliceStrategy):
    name = "function"

    def __init__(self, fn: Callable[[Ball, Fraction], AliceMove]):
        self.fn = fn

    def __call__(self, ball, beta):
        return self.fn(ball, beta)


def strategy_from_json(d: dict, k: int | None = None) -> AliceStrategy:
    kind = d.get("strategy")
    k = int(d.get("k", 0)) if k is None else k
    if kind == "center":
        return CenterStrategy(k)
    if kind == "avoid":
        targets = []
        for t in d.get("targets", []):
            if isinstance(t, dict):
                targets.append(Hyperplane.of([frac_from_json(v) for v in t["normal"]], frac_from_json(t["offset"])))
            else:
                targets.append(tuple(frac_from_json(v) for v in t))
        return AvoidCountable(targets, k)
    if kind == "scaled":
        return ScaledStrategy(strategy_from_json(d["inner"], k), frac_from_json(d["factor"]))
    raise ConfigError(f"cannot rebuild strategy {kind!r} from JSON")


def avoid_countable(targets, k: int = 0) -> AvoidCountable:
    return AvoidCountable(targets, k)


def rationals_by_height(count: int, lo=0, hi=1) -> list[Fraction]:
    """The first `count` rationals in [lo, hi], ordered by denominator then numerator."""
    lo, hi = to_fraction(lo), to_fraction(hi)
    out = []
    seen = set()
    q = 1
    while len(out) < count:
        for p in range(math.ceil(lo * q), math.floor(hi * q) + 1):
            x = Fraction(p, q)
            if x not in seen:
                seen.add(x)
                out.append(x)
                if len(out) == count:
                    break
        q += 1
    return out


# ---------------------------------------------------------------- referee

@dataclass
class GameTranscript:
    config: GameConfig
    moves: list = field(default_factory=list)          # ("bob", Ball) | ("alice", AliceMove)
    certificates: list = field(default_factory=list)

    @property
    def turn(self) -> str:
        if not self.moves:
            return "bob"
        return "alice" if self.moves[-1][0] == "bob" else "bob"

    def bob_balls(self) -> list[Ball]:
        return [m for who, m in self.moves if who == "bob"]

    @property
    def outcome(self) -> Ball | None:
        balls = self.bob_balls()
        return balls[-1] if balls else None

    def to_json(self) -> dict:
        out = []
        for who, m in self.moves:
            if who == "bob":
                d = {"player": "bob", "address": m.address_json(), "radius": frac_json(m.rad)}
                if m.structure.is_padic:
                    d["residues"] = list(m.residues)
                    d["modulus"] = m.modulus
                else:
                    d["center"] = [frac_json(v) for v in m.center]
                out.append(d)
            else:
                out.append({"player": "alice", **m.to_json()})
        oc = self.outcome
        return {"config": self.config.to_json(), "moves": out, "certificates": self.certificates,
                "outcome": None if oc is None else {"address": oc.address_json(), "radius": frac_json(oc.rad)}}


def referee_step(config: GameConfig, transcript: GameTranscript, move) -> GameTranscript:
    """Check one move and append it with a legality certificate; raises on illegal moves."""
    turn = transcript.turn
    if isinstance(move, AliceMove):
        if turn != "alice":
            raise IllegalRadius("it is Bob's turn")
        b = transcript.moves[-1][1]
        if config.mode == "absolute":
            if move.radius > config.beta * b.rad:
                raise IllegalRadius(f"Alice radius {move.radius} exceeds beta * rad(B) = {config.beta * b.rad}")
            if move.kind == "slab" and config.k == 0:
                raise IllegalRadius("hyperplane moves need k >= 1")
            if move.kind == "ball" and config.k > 0:
                raise IllegalRadius("k >= 1 games take hyperplane moves")
            cert = {"player": "alice", "rule": "rad(A) <= beta rad(B)", "ratio": frac_json(move.radius / b.rad)}
        else:
            if move.radius != config.alpha * b.rad:
                raise IllegalRadius("Schmidt move must have rad(A) = alpha rad(B)")
            if not region_inside_ball(move, b):
                raise NotContained("Alice's ball must lie inside Bob's ball")
            cert = {"player": "alice", "rule": "rad(A) = alpha rad(B), A in B"}
        transcript.moves.append(("alice", move))
        transcript.certificates.append(cert)
        return transcript
    if not isinstance(move, Ball):
        raise ConfigError("a move is a Ball (Bob) or an AliceMove")
    if turn != "bob":
        raise IllegalRadius("it is Alice's turn")
    if not transcript.moves:
        transcript.moves.append(("bob", move))
        transcript.certificates.append({"player": "bob", "rule": "initial ball"})
        return transcript
    a = transcript.moves[-1][1]
    prev = transcript.moves[-2][1]
    if config.mode == "absolute":
        if move.rad < config.beta * prev.rad:
            raise IllegalRadius(f"Bob radius {move.rad} is below beta * rad = {config.beta * prev.rad}")
        if not prev.contains_ball(move):
            raise NotContained("Bob's ball must lie inside his previous ball")
        if region_meets_ball(a, move):
            raise IntersectsRemoved("Bob's ball meets the region Alice deleted")
        cert = {"player": "bob", "rule": "B' in B \\ A, rad(B') >= beta rad(B)",
                "ratio": frac_json(move.rad / prev.rad)}
    else:
        if move.rad != config.beta * a.radius:
            raise IllegalRadius("Schmidt move must have rad(B') = beta rad(A)")
        if not ball_inside_region(move, a):
            raise NotContained("Bob's ball must lie inside Alice's ball")
        cert = {"player": "bob", "rule": "rad(B') = beta rad(A), B' in A"}
    transcript.moves.append(("bob", move))
    transcript.certificates.append(cert)
    return transcript


def _bob_choice(policy: str, legal: list[Ball], alice: AliceMove, rng) -> Ball:
    if policy in ("leftmost", "leftmost-legal"):
        return legal[0]
    if policy in ("seeded", "random", "seeded-random"):
        return legal[int(rng.integers(len(legal)))]
    if policy in ("greedy", "adversarial", "adversarial-greedy"):
        def score(b):
            if b.structure.is_padic:
                return padic_abs(alice.center[0] - b.residues[0], b.structure.p) if alice.kind == "ball" else 0
            z = b.center
            if alice.kind == "ball":
                return max(abs(x - y) for x, y in zip(z, alice.center))
            a = alice.plane.normal
            return abs(sum(ai * zi for ai, zi in zip(a, z)) - alice.plane.offset) / _l1(a)
        return max(legal, key=score)
    raise ConfigError(f"unknown Bob policy {policy!r}")


def play(config: GameConfig, alice: AliceStrategy, bob: str = "leftmost", rounds: int = 10,
         start: Ball | None = None, seed: int = 0) -> GameTranscript:
    """Alternate Alice's strategy with a Bob policy for `rounds` rounds."""
    if config.mode != "absolute":
        raise ConfigError("play drives the absolute game; use referee_step for Schmidt transcripts")
    s = config.structure
    B = start if start is not None else Ball.root(s, s.default_origin())
    tr = GameTranscript(config)
    referee_step(config, tr, B)
    rng = np.random.default_rng(seed)
    u = config.bob_scale
    for _ in range(rounds):
        cur = tr.outcome
        move = alice(cur, config.beta)
        referee_step(config, tr, move)
        legal = [c for c in cur.split(u) if not region_meets_ball(move, c)]
        if not legal:
            raise Stuck(f"Bob has no legal ball below {cur.address_json()}")
        referee_step(config, tr, _bob_choice(bob, legal, move, rng))
    return tr


# ---------------------------------------------------------------- compilation

class _StrategyOracle(Oracle):
    """Removes the children of each parent that meet Alice's answer at the parent."""
    name = "strategy"

    def __init__(self, alice: AliceStrategy, beta: Fraction, k: int):
        self.alice = alice
        self.beta = beta
        self.k = k
        self.queries = 0

    def wants(self, n, m):
        return m == n

    def select(self, stage: Stage) -> np.ndarray:
        t = stage.tree
        s = t.structure
        P = stage.scale
        coords = stage.coords()
        out = []
        if s.is_padic:
            p = s.p
            mod0 = p ** t.origin.level
            mod = mod0 * P
        else:
            side = 2 * t.origin.radius / P
            lo0 = t.origin.lo()
        for g in range(stage.groups):
            a, b = int(stage.starts[g]), int(stage.starts[g + 1])
            if a == b:
                continue
            parent = stage.ancestor_ball(g)
            move = self.alice(parent, self.beta)
            self.queries += 1
            if move.radius > self.beta * parent.rad:
                raise LegalityBreach(f"strategy answered radius {move.radius} at a ball of radius {parent.rad}; "
                                     f"the limit is beta * rad = {self.beta * parent.rad}")
            if (move.kind == "slab") != (self.k > 0):
                raise LegalityBreach("strategy move kind does not match k")
            for i in range(a, b):
                c = [int(v) for v in coords[i]]
                if s.is_padic:
                    res = (t.origin.residues[0] + mod0 * c[0]) % mod
                    hit = region_meets_padic(move, res, mod, p)
                elif move.kind == "ball" and s.N == 1:
                    x0 = lo0[0] + c[0] * side
                    z = move.center[0]
                    hit = x0 - move.radius <= z <= x0 + side + move.radius
                else:
                    lo = tuple(l + k * side for l, k in zip(lo0, c))
                    hi = tuple(v + side for v in lo)
                    hit = region_meets_box(move, lo, hi)
                if hit:
                    out.append(i)
        return np.asarray(out, dtype=np.int64)


def r_epsilon(structure: SplittingStructure, eps, C=None, limit: int = 10 ** 6) -> int:
    """Smallest represented R with f(R)^(1-eps) >= C (C defaults to the packing constant)."""
    eps = to_fraction(eps)
    C = structure.packing_constant if C is None else to_fraction(C)
    e = 1 - eps
    if e <= 0:
        raise ConfigError("eps must be below 1")
    for u in structure.scales(limit):
        # f^e >= C  <=>  f^num >= C^den
        if Fraction(structure.f(u)) ** e.numerator >= Fraction(C) ** e.denominator:
            return u
    raise ConfigError("no scale found below the limit")


def strategy_to_cantor(alice: AliceStrategy, B: Ball, R: int, depth: int, expand=None,
                       gamma=None) -> tuple[CantorTree, list[int]]:
    """Compile a positional strategy (beta = 1/R) into a local Cantor tree."""
    s = B.structure
    beta = Fraction(1, R)
    g = gamma_of(s) if gamma is None else to_fraction(gamma)
    if not beta < g:
        raise ConfigError(f"1/R = {beta} must be below gamma(X) = {g}")
    oracle = _StrategyOracle(alice, beta, 0)
    tree = construct(Ball.root(s, B.origin), R, None, oracle, depth, expand=expand,
                     meta={"compiled": alice.to_json(), "beta": beta, "k": 0, "gamma": g})
    sv = tree.s_values()
    tree.meta["s_values"] = sv
    tree.meta["C_X"] = s.packing_constant
    tree.meta["within_packing"] = all(v <= s.packing_constant for v in sv)
    return tree, sv


@lru_cache(maxsize=32)
def c_kN(k: int, N: int, R: int = 10, coef: int = 4) -> Fraction:
    """Empirical max of (#cells of an R^N grid meeting a slab) / R^k.

    The slab is the closed sup-norm neighbourhood of half a cell side around a
    hyperplane; normals range over primitive integer vectors with entries of
    absolute value <= coef, and offsets over all critical positions.
    """
    if k == 0:
        return Fraction(3 ** N)
    if k != N - 1:
        raise ConfigError("c(k, N) is computed for k = 0 and k = N - 1")
    # cells [j, j+1]^N, slab {x : |a.x - c| <= ||a||_1 / 2}; meets iff |a.(2j+1) - 2c| <= 2||a||_1
    idx = np.array(list(product(range(R), repeat=N)), dtype=np.int64)
    best = 0
    for a in product(range(-coef, coef + 1), repeat=N):
        if not any(a) or math.gcd(*a) != 1:
            continue
        first = next(v for v in a if v)
        if first < 0:
            continue
        av = np.asarray(a, dtype=np.int64)
        l1 = int(np.abs(av).sum())
        dots = (2 * idx + 1) @ av
        # counts are maximal when the slab's lower edge sits on a cell threshold
        crit = np.unique(dots)
        for c2 in crit:
            cnt = int(np.count_nonzero((dots >= c2) & (dots <= c2 + 4 * l1)))
            best = max(best, cnt)
    return Fraction(best, R ** k)


def haw_strategy_to_cantor(alice: AliceStrategy, B: Ball, R: int, depth: int, k: int | None = None,
                           c_const=None, expand=None) -> tuple[CantorTree, list[int], dict]:
    """Compile a hyperplane strategy (beta = 1/R) into a local Cantor tree on a box."""
    s = B.structure
    if s.kind != "euclidean_box":
        raise ConfigError("HAW compilation needs a Euclidean box")
    N = s.N
    k = N - 1 if k is None else k
    if k == 0:
        tree, sv = strategy_to_cantor(alice, B, R, depth, expand)
        bound = Fraction(s.packing_constant)
        return tree, sv, {"k": 0, "c_kN": bound, "bound": bound, "pass": all(v <= bound for v in sv)}
    if k != N - 1:
        raise ConfigError("only k = N - 1 hyperplane games are supported")
    if R <= 3:
        raise ConfigError("R must exceed 3")
    beta = Fraction(1, R)
    oracle = _StrategyOracle(alice, beta, k)
    c_const = c_kN(k, N, R) if c_const is None else to_fraction(c_const)
    tree = construct(Ball.root(s, B.origin), R, None, oracle, depth, expand=expand,
                     meta={"compiled": alice.to_json(), "beta": beta, "k": k})
    sv = tree.s_values()
    bound = c_const * R ** k
    rep = {"k": k, "c_kN": c_const, "bound": bound, "pass": all(v <= bound for v in sv)}
    tree.meta["s_values"] = sv
    tree.meta["haw"] = {"c_kN": c_const, "bound": bound}
    return tree, sv, rep


def replay(tree: CantorTree, alice: AliceStrategy, beta=None, k: int = 0) -> dict:
    """Re-check every parent/child edge of a compiled tree as a legal game step.

    Each root-to-leaf path is a chain of such edges, so this certifies all
    paths at once. The checks use the general region predicates, not the
    compiler's fast path.
    """
    s = tree.structure
    beta = Fraction(1, tree.scales[0]) if beta is None else to_fraction(beta)
    failures = []
    edges = 0
    for n in range(tree.depth):
        ratio = Fraction(1, tree.scales[n])
        if ratio < beta:
            failures.append({"level": n, "rule": "radius", "detail": "child radius below beta * rad"})
        par = tree.parents[n + 1]
        if len(par) == 0:
            continue
        boundaries = np.flatnonzero(np.diff(par)) + 1
        starts = np.concatenate(([0], boundaries))
        for st in starts.tolist():
            pi = int(par[st])
            parent = tree.ball(n, pi)
            move = alice(parent, beta)
            if move.radius > beta * parent.rad:
                failures.append({"level": n, "parent": pi, "rule": "radius"})
            lo_i, hi_i = tree.descendant_range(n, pi, n + 1)
            for ci in range(lo_i, hi_i):
                child = tree.ball(n + 1, ci)
                edges += 1
                if not parent.contains_ball(child):
                    failures.append({"level": n + 1, "child": ci, "rule": "containment"})
                if region_meets_ball(move, child):
                    failures.append({"level": n + 1, "child": ci, "rule": "avoidance"})
    leaves = tree.size(tree.depth) + sum(len(tree.frontier(n)) for n in range(tree.depth))
    return {"pass": not failures, "edges": edges, "paths": leaves, "failures": failures[:20]}


def replay_path(config: GameConfig, alice: AliceStrategy, tree: CantorTree, leaf: int, level: int | None = None
                ) -> GameTranscript:
    """Run one root-to-leaf path through the referee with Alice's answers interleaved."""
    level = tree.depth if level is None else level
    chain = [leaf]
    for n in range(level, 0, -1):
        chain.append(int(tree.parents[n][chain[-1]]))
    chain.reverse()
    tr = GameTranscript(config)
    referee_step(config, tr, tree.ball(0, 0))
    for n in range(1, level + 1):
        referee_step(config, tr, alice(tr.outcome, config.beta))
        referee_step(config, tr, tree.ball(n, chain[n]))
    return tr
