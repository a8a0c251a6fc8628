"""Command line front end.

Every subcommand accepts ``--config file.json``; keys in the file fill any
flag not given on the command line (flag names with dashes replaced by
underscores). Reports go to stdout as JSON with sorted keys, artifacts to
the paths given by ``--out``/``--csv``/``--svg``.

Exit codes: 0 success or certified, 1 ran but not certified, 2 usage or
configuration error, 3 internal invariant breach.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from importlib import resources

from . import __version__
from . import cantor_engine as ce
from . import diophantine as dp
from . import games as gm
from . import plot
from . import resonant as rs
from .errors import CantorWinError, ConfigError
from .exact import frac_json, to_fraction
from .sequences import Seq
from .splitting import Ball, SplittingStructure, verify_axioms

THREADS_ENV = "CANTORWIN_THREADS"

DEFAULTS = {
    "kind": "euclidean", "n": 1, "p": 5, "R": 10, "depth": 4, "eps": "1/2",
    "oracle": "none", "seed": 0, "expand": None, "Q": 5000, "H": 200, "I": 5, "bound": 100000,
    "policy": "seeded", "family": None, "c": None, "g": None, "k_seq": None, "d": None, "a": 2, "b": 3,
    "N": 1, "c1": "1", "delta": "1/100", "f": None, "r": None, "fR": None, "s": None, "budgets": None,
    "k": 2, "count": 50, "beta": None, "bob": "leftmost", "rounds": 10, "avoid": "rationals",
    "normal": "1,2", "offset": "4/5", "strategy": None, "x": None, "eps0": "1/2", "ks": "1,2,3",
    "scan_depth": None,
}


# ---------------------------------------------------------------- helpers

def _schema(name: str) -> dict:
    return json.loads(resources.files("cantorwin").joinpath("schemas", f"{name}.schema.json").read_text())


def validate(obj: dict, name: str) -> None:
    import jsonschema
    try:
        jsonschema.validate(obj, _schema(name))
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"{name} document fails schema validation: {exc.message}") from exc
    if name == "tree":
        # the index arrays can hold millions of entries; check them in bulk
        for lv in obj["levels"]:
            for key in ("parent", "child"):
                arr = lv[key]
                if arr and not all(type(v) is int and v >= 0 for v in arr):
                    raise ConfigError(f"tree document fails schema validation: bad {key} index")


def dumps(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


def _plain(x):
    if isinstance(x, Fraction):
        return frac_json(x)
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if hasattr(x, "item") and callable(x.item):
        return x.item()
    if isinstance(x, float) and x != x:
        return None
    return x


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _read_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def _opt(args, name):
    v = getattr(args, name, None)
    if v is None:
        v = args._config.get(name, DEFAULTS.get(name))
    return v


def _frac(args, name):
    v = _opt(args, name)
    return None if v is None else to_fraction(v if not isinstance(v, float) else str(v))


def _int(args, name):
    v = _opt(args, name)
    return None if v is None else int(v)


def threads(args) -> int:
    t = getattr(args, "threads", None)
    if t is None:
        t = args._config.get("threads", os.environ.get(THREADS_ENV, 1))
    try:
        t = int(t)
    except ValueError as exc:
        raise ConfigError(f"bad thread count {t!r}") from exc
    return max(1, t)


def structure_from_args(args) -> SplittingStructure:
    d = args._config.get("structure")
    if isinstance(d, dict) and getattr(args, "kind", None) is None:
        return SplittingStructure.from_json(d)
    kind = _opt(args, "kind")
    N = _int(args, "n")
    if kind in ("padic", "p-adic"):
        return SplittingStructure("padic", N=N, p=_int(args, "p"))
    return SplittingStructure(kind, N=N)


def family_from_args(args):
    d = args._config.get("family")
    if isinstance(d, dict):
        return rs.family_from_json(d)
    name = _opt(args, "family")
    if name is None:
        return None
    key = str(name).lower().replace("-", "_")
    if key in ("classical_bad", "bad"):
        return rs.ClassicalBad(_int(args, "N"))
    if key in ("lagrange", "lagrange_multiples"):
        return rs.LagrangeMultiples(_opt(args, "g") or "q", Seq(_opt(args, "k_seq") or "geometric:10"))
    if key == "mad":
        return rs.MixedLittlewood(Seq(_opt(args, "d") or "geometric:10"), _opt(args, "g") or "logstar(q)")
    if key in ("timesab", "times_ab"):
        return rs.TimesAB(_int(args, "a"), _int(args, "b"), _frac(args, "eps"))
    if key in ("padic", "padic_bad"):
        return rs.PadicBad(_int(args, "p"), _frac(args, "c1"))
    raise ConfigError(f"unknown family {name!r}")


def _expand(args):
    w = _opt(args, "expand")
    if w is None:
        return None
    return ("seeded", int(w), _int(args, "seed")) if _opt(args, "policy") == "seeded" else ("leftmost", int(w))


def _budgets(args, fR, depth):
    """Budgets from --r cells, --s local list, or the cantor-winning form with --eps."""
    r = _opt(args, "r")
    s = _opt(args, "s")
    if r is not None:
        cells = ce.parse_cells(r) if isinstance(r, str) else {tuple(map(int, k.split(","))): to_fraction(v)
                                                                for k, v in r.items()}
        return ce.BudgetMatrix.explicit(cells, depth)
    if s is not None:
        vals = [to_fraction(x) for x in (s.split(",") if isinstance(s, str) else s)]
        return ce.BudgetMatrix.local(vals + [vals[-1]] * max(0, depth + 1 - len(vals)))
    return ce.BudgetMatrix.cantor_winning(fR, _frac(args, "eps"), depth)


def _report(command: str, ok: bool, **fields) -> dict:
    out = {"command": command, "status": "ok" if ok else "not_certified", "version": __version__}
    out.update(fields)
    return out


def _emit(args, report: dict) -> int:
    report = _plain(report)
    validate(report, "report")
    text = dumps(report)
    if getattr(args, "report", None):
        _write(args.report, text)
    if not getattr(args, "quiet", False):
        sys.stdout.write(text)
    return 0 if report["status"] == "ok" else 1


# ---------------------------------------------------------------- structure

def cmd_structure(args) -> int:
    s = structure_from_args(args)
    if args.action == "info":
        B = Ball.root(s, s.default_origin())
        return _emit(args, _report("structure info", True, structure=s.to_json(), u0=s.u0(),
                                   origin=B.origin.to_json(), scales=s.scales(100)[:10]))
    if args.action == "dim":
        ex = s.dim_exact()
        return _emit(args, _report("structure dim", True, structure=s.to_json(), dim=s.dim(),
                                   dim_exact=ex))
    u = getattr(args, "u", None) or args._config.get("u") or s.base or 2
    v = getattr(args, "v", None) or args._config.get("v") or s.base or 3
    B = Ball.root(s, s.default_origin())
    rep = verify_axioms(s, B, int(u), int(v))
    ok = rep["pass"]
    return _emit(args, _report("structure verify", ok, structure=s.to_json(), u=u, v=v, axioms=rep))


# ---------------------------------------------------------------- cantor

def _tree_out(args, tree: ce.CantorTree) -> dict:
    doc = _plain(tree.to_json())
    validate(doc, "tree")
    if getattr(args, "out", None):
        _write(args.out, json.dumps(doc, sort_keys=True) + "\n")
    if getattr(args, "csv", None):
        _write(args.csv, plot.tree_csv(tree))
    return doc


def _load_tree(path: str) -> ce.CantorTree:
    doc = _read_json(path)
    validate(doc, "tree")
    return ce.CantorTree.from_json(doc)


def cmd_cantor(args) -> int:
    act = args.action
    depth = _int(args, "depth")
    if act == "tseq":
        f = _opt(args, "f")
        if f is None:
            s = structure_from_args(args)
            fv = [s.f(_int(args, "R"))]
            fR = fv[0]
        else:
            fv = [int(x) for x in str(f).split(",")]
            fR = fv[0]
        b = _budgets(args, fR, depth)
        ok, t = ce.nonempty_certificate(b, fv, depth)
        if not getattr(args, "quiet", False):
            for n, tn in enumerate(t):
                sys.stderr.write(f"t_{n} = {tn}\n")
        return _emit(args, _report("cantor tseq", ok, t=t, t_float=[float(x) for x in t], positive=ok))

    if act == "dim":
        s = structure_from_args(args)
        R = _int(args, "R")
        b = _budgets(args, s.f(R), depth)
        rep = ce.dim_lower_bound(s, R, b, depth, _frac(args, "delta"))
        return _emit(args, _report("cantor dim", rep["certified"], R=R, **rep))

    if act == "build":
        s_fam = family_from_args(args)
        R = _int(args, "R")
        if s_fam is not None:
            s = SplittingStructure("padic", N=1, p=s_fam.p) if s_fam.padic else SplittingStructure("euclidean_box", N=s_fam.N)
            B = Ball.root(s, s.default_origin())
            tree = rs.bad_to_cantor(s_fam, B, R, depth, c=_opt(args, "c"), expand=_expand(args))
            doc = _tree_out(args, tree)
            return _emit(args, _report("cantor build", tree.empty_level is None, sizes=tree.sizes(),
                                       observed=doc["observed"], c=tree.meta["c"],
                                       class_sizes=tree.meta.get("class_sizes"), out=args.out))
        s = structure_from_args(args)
        B = Ball.root(s, s.default_origin())
        use_budget = _opt(args, "oracle") not in ("none", None) or _opt(args, "r") is not None
        b = _budgets(args, s.f(R), depth) if use_budget else None
        oracle = ce.make_oracle(_opt(args, "oracle"), _int(args, "seed"))
        tree = ce.construct(B, R, b, oracle, depth, expand=_expand(args), threads=threads(args))
        _tree_out(args, tree)
        comp = ce.budget_compliance(tree, b) if b is not None else None
        ok = tree.empty_level is None and (comp is None or comp["pass"])
        return _emit(args, _report("cantor build", ok, sizes=tree.sizes(), compliance=comp, out=args.out))

    if act == "trim":
        tree = _load_tree(args.tree)
        trimmed = ce.local_trim(tree)
        _tree_out(args, trimmed)
        return _emit(args, _report("cantor trim", True, sizes=trimmed.sizes(), s=trimmed.s_values()))

    if act == "intersect":
        paths = _opt(args, "budgets") or []
        if isinstance(paths, str):
            paths = paths.split(",")
        if not paths:
            raise ConfigError("intersect needs --budgets file1.json,file2.json")
        parts = [ce.BudgetMatrix.from_json(_read_json(p)) for p in paths]
        summed = ce.intersect_budgets(parts)
        f = _opt(args, "f")
        fv = [int(x) for x in str(f).split(",")] if f is not None else [structure_from_args(args).f(_int(args, "R"))]
        ok, t = ce.nonempty_certificate(summed, fv, depth)
        if args.out:
            _write(args.out, dumps(summed.to_json(depth)))
        return _emit(args, _report("cantor intersect", ok, t=t, budgets=summed.to_json(depth)))

    if act == "combine":
        ks = [int(x) for x in str(_opt(args, "ks")).split(",")]
        comb, cert = ce.cantor_winning_combine(_frac(args, "eps0"), _frac(args, "eps"), _frac(args, "fR") or 256,
                                               ks, depth=depth)
        cert = dict(cert)
        cert.pop("rows")
        return _emit(args, _report("cantor combine", cert["pass"], **cert))

    if act == "reindex":
        s = structure_from_args(args)
        R, k = _int(args, "R"), _int(args, "k")
        seed = _int(args, "seed")
        B = Ball.root(s, s.default_origin())
        coarse_depth = max(1, depth // k)
        coarse = ce.BudgetMatrix.cantor_winning(s.f(R ** k), _frac(args, "eps"), coarse_depth)
        oracle = _opt(args, "oracle")
        if oracle in (None, "none"):
            oracle = "greedy"
        t1 = ce.construct(B, R ** k, coarse, ce.make_oracle(oracle, seed), coarse_depth)
        fine_b = ce.reindex_power(coarse, k)
        t2 = ce.construct(B, R, fine_b, ce.reindex_oracle(ce.make_oracle(oracle, seed), k, [R ** k] * coarse_depth),
                          coarse_depth * k)
        same = all(ce.region_set(t1, n) == ce.region_set(t2, n * k) for n in range(coarse_depth + 1))
        return _emit(args, _report("cantor reindex", same, identical=same, coarse_sizes=t1.sizes(),
                                   fine_sizes=[t2.size(n * k) for n in range(coarse_depth + 1)]))
    raise ConfigError(f"unknown cantor action {act!r}")


# ---------------------------------------------------------------- verify

def _point(args, tree_family_key=None):
    x = _opt(args, "x")
    if x is not None:
        if args.action == "padic":
            return dp.padic_prefix(x, _int(args, "p"), 40), None
        return dp.PointEnclosure.exact(to_fraction(x)), None
    path = getattr(args, "tree", None) or args._config.get("tree")
    if not path:
        raise ConfigError("give --tree tree.json or --x value")
    tree = _load_tree(path)
    pt = dp.extract_point(tree, "leftmost" if _opt(args, "policy") == "leftmost" else "seeded", _int(args, "seed"))
    return pt, tree


def cmd_verify(args) -> int:
    pt, tree = _point(args)
    fam = (tree.meta.get("family") if tree is not None else None) or {}
    act = args.action
    if act == "bad":
        rep = dp.bad_constant_scan(pt, _int(args, "Q"))
    elif act == "mad":
        rep = dp.mad_scan(pt, Seq(_opt(args, "d") or fam.get("d") or "geometric:10"),
                          _opt(args, "g") or fam.get("g") or "logstar(q)", _int(args, "Q"))
    elif act == "lagrange":
        out = dp.lagrange_multiples_scan(pt, Seq(_opt(args, "k_seq") or fam.get("k") or "geometric:10"),
                                         _opt(args, "g") or fam.get("g") or "q", _int(args, "I"), _int(args, "Q"))
        return _emit(args, _report("verify lagrange", out["positive"], point=pt.to_json(), **out))
    elif act == "timesab":
        a = _int(args, "a") if getattr(args, "a", None) is not None else int(fam.get("a", DEFAULTS["a"]))
        b = _int(args, "b") if getattr(args, "b", None) is not None else int(fam.get("b", DEFAULTS["b"]))
        eps = _frac(args, "eps") if getattr(args, "eps", None) is not None else to_fraction(fam.get("eps", 1))
        rep = dp.times_ab_scan(pt, a, b, eps, _int(args, "bound"))
    elif act == "padic":
        rep = dp.padic_bad_scan(pt, _int(args, "H"), _int(args, "p"))
    else:
        raise ConfigError(f"unknown verify action {act!r}")
    if getattr(args, "csv", None):
        _write(args.csv, rep.to_csv())
    if getattr(args, "table", False):
        sys.stderr.write(f"{'scan':>10} {'bound':>8} {'min (certified)':>22} {'argmin':>12} {'indet.':>7}\n")
        sys.stderr.write(f"{rep.kind:>10} {rep.Q:>8} {float(rep.min_value):>22.12g} {str(rep.argmin):>12} "
                         f"{rep.indeterminate:>7}\n")
    return _emit(args, _report(f"verify {act}", rep.positive, point=pt.to_json(), **rep.to_json()))


# ---------------------------------------------------------------- games

def _strategy(args, k: int):
    avoid = _opt(args, "avoid")
    if avoid == "rationals":
        al = gm.avoid_countable(gm.rationals_by_height(_int(args, "count")), 0)
    elif avoid == "line":
        normal = [to_fraction(v) for v in str(_opt(args, "normal")).split(",")]
        al = gm.AvoidCountable([gm.Hyperplane.of(normal, _frac(args, "offset"))], k)
    elif avoid == "center":
        al = gm.CenterStrategy(k)
    else:
        raise ConfigError(f"unknown target set {avoid!r} (rationals, line, center)")
    if _opt(args, "strategy") == "oversized":
        al = gm.ScaledStrategy(al, 2)
    return al


def cmd_game(args) -> int:
    act = args.action
    if act == "replay":
        tree = _load_tree(args.tree)
        meta = tree.meta
        if "compiled" not in meta:
            raise ConfigError("tree was not compiled from a strategy")
        al = gm.strategy_from_json(meta["compiled"])
        rep = gm.replay(tree, al, to_fraction(meta["beta"]), int(meta.get("k", 0)))
        return _emit(args, _report("game replay", rep["pass"], **rep))
    if _opt(args, "avoid") == "line" and getattr(args, "n", None) is None and "n" not in args._config:
        args.n = 2
    s = structure_from_args(args)
    k = 0 if _opt(args, "avoid") != "line" else s.N - 1
    if act == "compile":
        R, depth = _int(args, "R"), _int(args, "depth")
        B = Ball.root(s, s.default_origin())
        al = _strategy(args, k)
        if k == 0:
            tree, sv = gm.strategy_to_cantor(al, B, R, depth, expand=_expand(args))
            bound = s.packing_constant
            extra = {"C_X": bound}
        else:
            tree, sv, haw = gm.haw_strategy_to_cantor(al, B, R, depth, k, expand=_expand(args))
            bound = haw["bound"]
            extra = {"c_kN": haw["c_kN"]}
        _tree_out(args, tree)
        ok = all(v <= bound for v in sv)
        return _emit(args, _report("game compile", ok, s_values=sv, max_s=max(sv) if sv else 0, bound=bound,
                                   sizes=tree.sizes(), out=args.out, **extra))
    if act == "play":
        beta = _frac(args, "beta") or Fraction(1, 10)
        cfg = gm.GameConfig(s, beta, k)
        al = _strategy(args, k)
        tr = gm.play(cfg, al, _opt(args, "bob"), _int(args, "rounds"), seed=_int(args, "seed"))
        doc = _plain(tr.to_json())
        validate(doc, "transcript")
        if args.out:
            _write(args.out, dumps(doc))
        return _emit(args, _report("game play", True, rounds=_int(args, "rounds"), outcome=doc["outcome"],
                                   moves=len(doc["moves"])))
    raise ConfigError(f"unknown game action {act!r}")


# ---------------------------------------------------------------- plot

def cmd_plot(args) -> int:
    tree = _load_tree(args.tree)
    if args.svg:
        _write(args.svg, plot.tree_svg(tree, __version__))
    if args.csv:
        _write(args.csv, plot.tree_csv(tree))
    return _emit(args, _report("plot", True, levels=tree.sizes(), svg=args.svg, csv=args.csv,
                               empty_level=tree.empty_level))


# ---------------------------------------------------------------- parser

def _common(p):
    p.add_argument("--config", help="JSON config; flags override its keys")
    p.add_argument("--report", help="also write the JSON report here")
    p.add_argument("--quiet", action="store_true", help="do not print the report")
    p.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1)")


def _structure_flags(p):
    p.add_argument("--kind", help="euclidean | middle-third | padic")
    p.add_argument("--n", type=int, help="dimension N")
    p.add_argument("--p", type=int, help="prime for p-adic structures")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cantorwin", description="Generalized Cantor sets, bad sets and games.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("structure", help="splitting structures")
    p.add_argument("action", choices=["info", "verify", "dim"])
    _structure_flags(p)
    p.add_argument("--u", type=int)
    p.add_argument("--v", type=int)
    _common(p)
    p.set_defaults(func=cmd_structure)

    p = sub.add_parser("cantor", help="Cantor constructions and certificates")
    p.add_argument("action", choices=["build", "tseq", "dim", "trim", "intersect", "reindex", "combine"])
    _structure_flags(p)
    p.add_argument("--R", type=int, help="scale")
    p.add_argument("--depth", type=int)
    p.add_argument("--eps", help="epsilon for cantor-winning budgets")
    p.add_argument("--eps0", help="epsilon_0 for combine")
    p.add_argument("--fR", help="f(R) for combine")
    p.add_argument("--ks", help="scale exponents for combine, e.g. 1,2,3")
    p.add_argument("--f", help="f(R_n) values, comma separated (last repeats)")
    p.add_argument("--r", help='explicit budget cells "m,n:value;..."')
    p.add_argument("--s", help="local budgets s_0,s_1,...")
    p.add_argument("--budgets", help="budget JSON files to intersect, comma separated")
    p.add_argument("--oracle", help="none | greedy | seeded | all")
    p.add_argument("--family", help="classical-bad | lagrange | mad | timesab | padic")
    p.add_argument("--N", type=int, help="dimension of the classical family")
    p.add_argument("--c", help="override the neighbourhood constant c")
    p.add_argument("--g", help="growth function, e.g. 'logstar(q)**2'")
    p.add_argument("--k-seq", dest="k_seq", help="multiplier sequence, e.g. geometric:10")
    p.add_argument("--d", help="pseudo-norm digits, e.g. geometric:10")
    p.add_argument("--a", type=int)
    p.add_argument("--b", type=int)
    p.add_argument("--c1", help="constant c1 of the p-adic family")
    p.add_argument("--k", type=int, help="re-indexing power")
    p.add_argument("--delta", help="delta of the product inequality")
    p.add_argument("--expand", type=int, help="expand at most this many survivors per level")
    p.add_argument("--policy", help="expansion policy: seeded | leftmost")
    p.add_argument("--seed", type=int)
    p.add_argument("--tree", help="input tree (trim)")
    p.add_argument("--out", help="output JSON path")
    p.add_argument("--csv", help="output CSV path")
    _common(p)
    p.set_defaults(func=cmd_cantor)

    p = sub.add_parser("verify", help="Diophantine scans of extracted points")
    p.add_argument("action", choices=["bad", "mad", "lagrange", "timesab", "padic"])
    p.add_argument("--tree", help="tree JSON to extract a point from")
    p.add_argument("--x", help="exact rational input instead of a tree")
    p.add_argument("--policy", help="path policy: leftmost | seeded")
    p.add_argument("--seed", type=int)
    p.add_argument("--Q", type=int)
    p.add_argument("--H", type=int)
    p.add_argument("--I", type=int)
    p.add_argument("--bound", type=int)
    p.add_argument("--p", type=int)
    p.add_argument("--a", type=int)
    p.add_argument("--b", type=int)
    p.add_argument("--eps")
    p.add_argument("--g")
    p.add_argument("--d")
    p.add_argument("--k-seq", dest="k_seq")
    p.add_argument("--csv", help="per-term CSV output")
    p.add_argument("--table", action="store_true", help="print a summary table to stderr")
    _common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("game", help="absolute games and strategy compilation")
    p.add_argument("action", choices=["play", "compile", "replay"])
    _structure_flags(p)
    p.add_argument("--avoid", help="rationals | line | center")
    p.add_argument("--count", type=int, help="number of rational targets")
    p.add_argument("--normal", help="line normal, e.g. 1,2")
    p.add_argument("--offset", help="line offset")
    p.add_argument("--strategy", help="'oversized' doubles every radius (illegal, for testing)")
    p.add_argument("--R", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--beta")
    p.add_argument("--bob", help="leftmost | seeded | greedy")
    p.add_argument("--rounds", type=int)
    p.add_argument("--expand", type=int)
    p.add_argument("--policy")
    p.add_argument("--seed", type=int)
    p.add_argument("--tree")
    p.add_argument("--out")
    _common(p)
    p.set_defaults(func=cmd_game)

    p = sub.add_parser("plot", help="SVG/CSV rendering of a tree")
    p.add_argument("--tree", required=True)
    p.add_argument("--svg")
    p.add_argument("--csv")
    _common(p)
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args._config = _read_json(args.config) if getattr(args, "config", None) else {}
        if not isinstance(args._config, dict):
            raise ConfigError("config file must hold a JSON object")
        return args.func(args)
    except CantorWinError as exc:
        sys.stderr.write(f"error ({type(exc).__name__}): {exc}\n")
        return exc.exit_code
    except (OSError, ValueError, KeyError, TypeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except Exception as exc:   # anything else is a bug
        sys.stderr.write(f"internal error ({type(exc).__name__}): {exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
