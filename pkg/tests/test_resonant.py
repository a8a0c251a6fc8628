import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from cantorwin import resonant as rs
from cantorwin.errors import MultiplicativeDependence
from cantorwin.splitting import Ball, SplittingStructure

F = Fraction


@pytest.fixture(scope="module")
def unit():
    return Ball.root(SplittingStructure("euclidean_box"))


def test_choose_c_values(unit):
    c, _ = rs.ClassicalBad(1).choose_c(unit, 20)
    assert c == F(1, 1201) and 1 / c > 3 * 20 ** 2
    c, _ = rs.LagrangeMultiples("q", {"geometric": 10}).choose_c(unit, 10)
    assert c == F(1, 100)


def test_classical_q_window(unit):
    fam = rs.ClassicalBad(1)
    assert fam.q_range(unit, 20, F(1, 400), 4) == range(20, 90)
    # cross-check against a plain sweep over q <= 100
    c = F(1, 400)
    sweep = [q for q in range(1, 101) if F(1, 20 ** 5) < c / q ** 2 <= F(1, 20 ** 4)]
    assert sweep == list(range(20, 90))


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.sampled_from([10, 20]))
def test_classical_members_lie_in_window(n, R):
    B = Ball.root(SplittingStructure("euclidean_box"))
    fam = rs.ClassicalBad(1)
    c, _ = fam.choose_c(B, R)
    pts = fam.enumerate_class(B, R, c, n)
    for pt in pts:
        q = pt.meta["q"]
        assert F(1, R ** (n + 1)) < c / q ** 2 <= F(1, R ** n)
        assert math.gcd(pt.meta["p"], q) == 1 and pt.m == 1
    # full enumeration: every reduced p/q in the window is present
    expect = {F(p, q) for q in fam.q_range(B, R, c, n) for p in range(q + 1) if math.gcd(p, q) == 1}
    assert {pt.value[0] for pt in pts} == expect


def test_lagrange_subclass_is_index(unit):
    fam = rs.LagrangeMultiples("q", {"geometric": 10})
    for n in range(1, 6):
        for pt in fam.enumerate_class(unit, 10, F(1, 100), n):
            assert pt.m == pt.meta["i"] <= n
            assert pt.value[0] == F(pt.meta["p"], 10 ** pt.meta["i"] * pt.meta["q"])


def test_times_ab_choice(unit):
    fam = rs.TimesAB(2, 3, 1)
    c, rep = fam.choose_c(unit, 8, 6)
    assert c == F(1, 8 ** 6) and rep["n0"] == 6
    assert all(fam.enumerate_class(unit, 8, c, n) == [] for n in range(1, 6))
    pts = fam.enumerate_class(unit, 8, c, 6)
    assert len(pts) == 7
    assert all(fam.in_sigma(pt.meta["q"]) for pt in pts)


def test_times_ab_m0_scan():
    fam = rs.TimesAB(2, 3, 1)
    for n in range(1, 8):
        g = (fam.g.approx(8 ** n))
        m = 1
        while 8 ** m < 8 * 64 * g:
            m += 1
        assert fam.m0(n, 8) == m


def test_dependent_bases():
    with pytest.raises(MultiplicativeDependence):
        rs.TimesAB(2, 4)
    assert rs.multiplicatively_dependent(8, 32)
    assert not rs.multiplicatively_dependent(6, 10)


def test_bad_to_cantor_avoids_neighbourhoods(unit):
    fam = rs.ClassicalBad(1)
    tree = rs.bad_to_cantor(fam, unit, 10, 4)
    c = tree.meta["c"]
    P = tree.scale(4)
    lows = sorted(int(k) for k in tree.coords(4).reshape(-1))
    for n in tree.meta["processed_classes"]:
        for pt in fam.enumerate_class(unit, 10, c, n):
            x, r = pt.value[0], c / pt.meta["q"] ** 2
            for k in lows:
                assert F(k + 1, P) < x - r or F(k, P) > x + r


def test_times_ab_tree_avoids(unit):
    fam = rs.TimesAB(2, 3, 1)
    tree = rs.bad_to_cantor(fam, unit, 8, 6)
    c = tree.meta["c"]
    P = tree.scale(6)
    codes = set(int(k) for k in tree.coords(6).reshape(-1))
    for pt in fam.enumerate_class(unit, 8, c, 6):
        lo, hi = pt.rho(c).bounds(64)
        x = pt.value[0]
        for k in range(math.floor((x - hi) * P) - 1, math.ceil((x + hi) * P) + 1):
            if k in codes:
                assert F(k + 1, P) < x - hi or F(k, P) > x + hi


def test_empty_family_gives_full_tree(unit):
    fam = rs.LagrangeMultiples("q", {"list": []})
    tree = rs.bad_to_cantor(fam, unit, 4, 3)
    assert tree.sizes() == [1, 4, 16, 64]


def test_classical_higher_subclasses_empty(unit):
    fam = rs.ClassicalBad(1)
    assert rs.q_estimate(fam, unit, 20, F(1, 1201), 4, 2)["max"] == 0


def test_check_corollary(unit):
    rep = rs.check_corollary(rs.ClassicalBad(1), unit, 20, F(1, 2), 4, mode="q")
    assert rep["pass"] and rep["worst"]["count"] <= 3
    twins = rs.ExplicitPoints([F(1, 2) + F(i, 10 ** 9) for i in range(40)], [F(1, 10 ** 3)] * 40)
    bad = rs.check_corollary(twins, unit, 10, F(1, 2), 3, mode="qtilde", constant=1, slack=1)
    assert not bad["pass"]


def test_padic_family():
    B = Ball.root(SplittingStructure("padic", p=5))
    fam = rs.PadicBad(5)
    assert fam.choose_c(B, 5, 4)[0] == F(1, 50)
    assert fam.choose_c(B, 25, 3)[0] == F(1, 1250)
    tree = rs.bad_to_cantor(fam, B, 5, 4)
    assert tree.empty_level is None


def test_hyperplane_witness():
    rep = rs.hyperplane_witness([(F(0), F(0)), (F(1, 2), F(1, 2)), (F(1, 3), F(1, 3))], 3, 10, F(1, 100))
    a, b = rep["hyperplane"]["normal"], rep["hyperplane"]["offset"]
    assert a[0] * F(1, 3) + a[1] * F(1, 3) == b
    rep = rs.hyperplane_witness([F(1, 3), F(1, 2)], 2, 10, F(1, 100))
    assert rep["spacing_certificate"]
    rep = rs.hyperplane_witness([(F(0), F(0)), (F(1, 2), F(0)), (F(0), F(1, 3))], 2, 10, F(1, 100))
    assert rep["volume_ge_lower"]


def test_family_json_roundtrip():
    for fam in (rs.ClassicalBad(2), rs.LagrangeMultiples("q", {"geometric": 10}),
                rs.MixedLittlewood({"geometric": 10}), rs.TimesAB(2, 3, 1), rs.PadicBad(7)):
        again = rs.family_from_json(fam.to_json())
        assert again.to_json() == fam.to_json()
