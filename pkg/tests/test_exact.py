import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from cantorwin.exact import (CReal, creal_inv, frac_json, ilog, iroot, padic_abs, padic_residue, power_bounds,
                             power_floor, power_le, to_fraction, vp)
from cantorwin.errors import ConfigError
from cantorwin.growth import Growth

fracs = st.fractions(min_value=Fraction(1, 10 ** 6), max_value=10 ** 6)


@given(st.integers(0, 10 ** 30), st.integers(1, 7))
def test_iroot_is_floor_root(n, k):
    r = iroot(n, k)
    assert r ** k <= n < (r + 1) ** k


@given(st.integers(1, 10 ** 20), st.integers(2, 12))
def test_ilog(n, b):
    e = ilog(n, b)
    assert b ** e <= n < b ** (e + 1)


def test_to_fraction_forms():
    assert to_fraction("3/8") == Fraction(3, 8)
    assert to_fraction("0.125") == Fraction(1, 8)
    assert to_fraction({"frac": "1/3", "dec": "0.333"}) == Fraction(1, 3)
    assert to_fraction(7) == 7
    with pytest.raises(ConfigError):
        to_fraction(0.5)


@given(fracs)
def test_frac_json_roundtrip(x):
    assert to_fraction(frac_json(x)) == x


@given(st.integers(2, 300), st.fractions(min_value=0, max_value=5, max_denominator=12))
def test_power_bounds_bracket(base, e):
    lo, hi = power_bounds(Fraction(base), e)
    a, b = e.numerator, e.denominator
    assert lo ** b <= Fraction(base) ** a <= hi ** b
    f = power_floor(Fraction(base), e)
    assert f ** b <= base ** a < (f + 1) ** b


def test_power_le_exact_edge():
    # 256^(3/4) = 64 exactly
    assert power_le(Fraction(256), Fraction(3, 4), Fraction(64))
    assert not power_le(Fraction(256), Fraction(3, 4), Fraction(64) - Fraction(1, 10 ** 30))


@given(st.integers(1, 10 ** 9), st.sampled_from([2, 3, 5, 7]))
def test_padic_abs_matches_valuation(n, p):
    assert padic_abs(Fraction(n), p) == Fraction(1, p ** vp(n, p))


@given(st.integers(0, 10 ** 6), st.integers(1, 10 ** 4).filter(lambda q: q % 5), st.integers(1, 6))
def test_padic_residue_is_congruence(a, q, level):
    r = padic_residue(Fraction(a, q), 5, level)
    assert (r * q - a) % 5 ** level == 0


def test_creal_root_compare():
    s2 = CReal.root(Fraction(2), 2)
    assert s2.cmp(Fraction(141421, 100000)) > 0
    assert s2.cmp(Fraction(141422, 100000)) < 0
    inv = creal_inv(s2)
    lo, hi = inv.bounds(80)
    assert lo <= Fraction(70711, 100000) <= hi + Fraction(1, 10 ** 5)


def test_growth_functions():
    g = Growth("q")
    assert g.exact(7) == 7
    ls = Growth("logstar(q)")
    assert ls.approx(10 ** 6) == pytest.approx(ls(10 ** 6).bounds(64)[0], rel=1e-9)
    assert Growth("logstar(q)**2").approx(10 ** 6) == pytest.approx(ls.approx(10 ** 6) ** 2, rel=1e-9)
    with pytest.raises(ConfigError):
        Growth("q +")
