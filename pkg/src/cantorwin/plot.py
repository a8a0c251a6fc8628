"""SVG and CSV renderings of survivor levels (presentation only)."""
from __future__ import annotations

import csv
import io
from fractions import Fraction

from .cantor_engine import CantorTree

WIDTH = 800
ROW = 24
BAR = 14
MAX_BARS = 20000


def _intervals(tree: CantorTree, n: int) -> list[tuple[Fraction, Fraction]]:
    """Level-n survivors as [a, b] subintervals of [0, 1] (first coordinate / residue order)."""
    P = tree.scale(n)
    cs = tree.coords(n)
    s = tree.structure
    out = []
    if s.is_padic:
        for c in cs:
            k = int(c[0])
            out.append((Fraction(k, P), Fraction(k + 1, P)))
        out.sort()
    else:
        for c in cs:
            k = int(c[0])
            out.append((Fraction(k, P), Fraction(k + 1, P)))
        if s.N > 1:
            out = sorted(set(out))
    if len(out) > MAX_BARS:
        merged = [out[0]]
        for a, b in out[1:]:
            if a <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(b, merged[-1][1]))
            else:
                merged.append((a, b))
        out = merged
    return out


def tree_svg(tree: CantorTree, version: str = "") -> str:
    last = tree.depth
    notice = None
    if tree.empty_level is not None:
        last = tree.empty_level - 1
        notice = f"level {tree.empty_level} is empty; drawing stops at level {last}"
    height = ROW * (last + 1) + (2 * ROW if notice else ROW)
    lines = ['<?xml version="1.0" encoding="UTF-8"?>']
    if version:
        lines.append(f"<!-- cantorwin {version} -->")
    lines.append(f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH + 60}" height="{height}">')
    for n in range(last + 1):
        y = ROW * n + 4
        lines.append(f'<g class="level" data-level="{n}">')
        lines.append(f'<text x="2" y="{y + BAR - 2}" font-size="11">{n}</text>')
        for a, b in _intervals(tree, n):
            x = 40 + float(a) * WIDTH
            w = max(float(b - a) * WIDTH, 0.2)
            lines.append(f'<rect x="{x:.4f}" y="{y}" width="{w:.4f}" height="{BAR}" fill="#335"/>')
        lines.append("</g>")
    if notice:
        lines.append(f'<text x="40" y="{ROW * (last + 1) + 16}" font-size="12">{notice}</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def tree_csv(tree: CantorTree) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    N = tree.structure.N
    if tree.structure.is_padic:
        w.writerow(["level"] + [f"residue{i}" for i in range(N)] + ["modulus"])
    else:
        w.writerow(["level"] + [f"lo{i}" for i in range(N)] + [f"hi{i}" for i in range(N)])
    w.writerows(tree.to_csv_rows())
    return buf.getvalue()
