import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from cantorwin.errors import ConfigError, UnsupportedScale
from cantorwin.splitting import (Ball, Origin, SplittingStructure, a_u_membership, address_to_coords,
                                 coords_to_address, packing_count, verify_axioms)

F = Fraction


def intervals(balls):
    return [(b.bounds[0][0], b.bounds[1][0]) for b in balls]


def test_split_examples():
    R1 = SplittingStructure("euclidean_box")
    B = Ball.root(R1)
    assert intervals(B.split(3)) == [(0, F(1, 3)), (F(1, 3), F(2, 3)), (F(2, 3), 1)]
    mt = SplittingStructure("middle_third")
    assert intervals(Ball.root(mt).split(3)) == [(0, F(1, 3)), (F(2, 3), 1)]
    pa = SplittingStructure("padic", p=5)
    kids = Ball.root(pa).split(5)
    assert [k.residues[0] for k in kids] == [0, 1, 2, 3, 4]
    assert all(k.modulus == 5 and k.rad == F(1, 5) for k in kids)


def test_unsupported_scale():
    with pytest.raises(UnsupportedScale):
        Ball.root(SplittingStructure("middle_third")).split(2)
    with pytest.raises(UnsupportedScale):
        Ball.root(SplittingStructure("padic", p=3)).split(6)


def test_bad_structures():
    with pytest.raises(ConfigError):
        SplittingStructure("padic", p=6)
    with pytest.raises(ConfigError):
        SplittingStructure("middle_third", N=2)
    with pytest.raises(ConfigError):
        SplittingStructure("hexagonal")


@pytest.mark.parametrize("s,u,v", [
    (SplittingStructure("euclidean_box", N=2), 2, 3),
    (SplittingStructure("middle_third"), 3, 3),
    (SplittingStructure("padic", p=3), 3, 9),
])
def test_axioms_hold(s, u, v):
    rep = verify_axioms(s, Ball.root(s), u, v)
    assert rep["pass"], rep


def test_middle_third_composition_has_four_intervals():
    s = SplittingStructure("middle_third")
    rep = verify_axioms(s, Ball.root(s), 3, 3)
    assert rep["composition"]["direct"] == 4


def test_dims():
    assert SplittingStructure("euclidean_box", N=2).dim() == 2
    assert SplittingStructure("padic", p=5).dim() == 1
    assert SplittingStructure("middle_third").dim() == pytest.approx(math.log(2) / math.log(3), abs=1e-12)


def test_membership_examples():
    mt = SplittingStructure("middle_third")
    B = Ball.root(mt)
    assert not a_u_membership(F(1, 2), B, [3, 9])
    assert a_u_membership(F(1, 4), B, [3, 9, 27])
    eu = SplittingStructure("euclidean_box")
    assert a_u_membership(F(2, 7), Ball.root(eu), [2, 6, 30])


@given(st.integers(0, 3 ** 6 - 1))
def test_membership_matches_ternary_digits(k):
    # points k/3^6 + 1/(2*3^7) avoid the middle thirds iff no ternary digit is 1
    x = F(k, 3 ** 6) + F(1, 2 * 3 ** 7)
    digits = []
    v = k
    for _ in range(6):
        digits.append(v % 3)
        v //= 3
    B = Ball.root(SplittingStructure("middle_third"))
    assert a_u_membership(x, B, [3 ** i for i in range(1, 7)]) == (1 not in digits)


def test_packing_constants():
    assert SplittingStructure("euclidean_box", N=2).packing_constant == 9
    assert SplittingStructure("padic", p=7).packing_constant == 1
    assert SplittingStructure("middle_third").packing_constant == 3
    assert packing_count(F(1), 1) == 3
    assert packing_count(F(1), 2) == 9


def test_packing_exhaustive_grid():
    # boxes of side 2 on the half-integer grid meeting a closed side-2 box: at most 3 per axis
    best = 0
    for shift in [F(i, 4) for i in range(8)]:
        lo, hi = -1 + shift, 1 + shift
        count, c = 0, F(-6)
        while c <= 6:
            if c - 1 <= hi and c + 1 >= lo:
                count += 1
            c += 2
        best = max(best, count)
    assert best <= 3


@settings(max_examples=50)
@given(st.sampled_from([("euclidean_box", 2, 0), ("middle_third", 1, 0), ("padic", 1, 3), ("padic", 2, 2)]),
       st.lists(st.integers(1, 2), min_size=1, max_size=3), st.data())
def test_address_roundtrip_and_containment(desc, exps, data):
    kind, N, p = desc
    s = SplittingStructure(kind, N=N, p=p)
    base = s.base or 2
    scales = [base ** e for e in exps]
    ball = Ball.root(s)
    for u in scales:
        kids = ball.split(u)
        assert len(kids) == s.f(u)
        child = kids[data.draw(st.integers(0, len(kids) - 1))]
        assert ball.contains_ball(child)
        assert child.rad == ball.rad / u
        ball = child
    coords = address_to_coords(s, ball.address)
    assert coords_to_address(s, scales, coords) == ball.address


def test_json_roundtrip():
    for s in (SplittingStructure("euclidean_box", N=3), SplittingStructure("padic", p=7, packing=2),
              SplittingStructure("middle_third")):
        assert SplittingStructure.from_json(s.to_json()) == s
    o = Origin.interval(F(1, 3), F(2, 3))
    assert Origin.from_json(o.to_json()) == o
