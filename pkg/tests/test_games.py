from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from cantorwin.errors import (ConfigError, IllegalRadius, IntersectsRemoved, LegalityBreach, NotContained, Stuck)
from cantorwin.games import (AliceMove, CenterStrategy, GameConfig, GameTranscript, Hyperplane, ScaledStrategy,
                             avoid_countable, c_kN, gamma_of, haw_strategy_to_cantor, play, r_epsilon,
                             rationals_by_height, referee_step, replay, replay_path, strategy_from_json,
                             strategy_to_cantor)
from cantorwin.splitting import Ball, SplittingStructure

F = Fraction
R1 = SplittingStructure("euclidean_box")


def started(beta=F(1, 10)):
    cfg = GameConfig(R1, beta)
    tr = GameTranscript(cfg)
    B = Ball.root(R1)
    referee_step(cfg, tr, B)
    return cfg, tr, B


def test_bob_exact_shrink_accepted():
    cfg, tr, B = started()
    referee_step(cfg, tr, AliceMove.ball((F(9, 10),), F(1, 40)))
    child = B.split(10)[0]
    assert child.rad == cfg.beta * B.rad
    referee_step(cfg, tr, child)
    assert tr.outcome == child
    assert len(tr.certificates) == 3


def test_alice_oversized():
    cfg, tr, B = started()
    with pytest.raises(IllegalRadius):
        referee_step(cfg, tr, AliceMove.ball((F(1, 2),), 2 * cfg.beta * B.rad))


def test_bob_meets_removed():
    cfg, tr, B = started()
    referee_step(cfg, tr, AliceMove.ball((F(1, 20),), F(1, 40)))
    with pytest.raises(IntersectsRemoved):
        referee_step(cfg, tr, B.split(10)[0])


def test_bob_too_small_and_outside():
    cfg, tr, B = started(F(1, 4))
    referee_step(cfg, tr, AliceMove.ball((F(1, 2),), F(1, 100)))
    with pytest.raises(IllegalRadius):
        referee_step(cfg, tr, B.split(10)[0])
    other = Ball.root(R1).split(2)[1].split(2)[1]
    cfg2, tr2, _ = started(F(1, 10))
    referee_step(cfg2, tr2, AliceMove.ball((F(9, 10),), F(1, 100)))
    referee_step(cfg2, tr2, Ball.root(R1).split(2)[0])
    referee_step(cfg2, tr2, AliceMove.ball((F(1, 4),), F(1, 1000)))
    with pytest.raises(NotContained):
        referee_step(cfg2, tr2, other)


def test_turn_order_and_slab_in_k0():
    cfg, tr, B = started()
    with pytest.raises(IllegalRadius):
        referee_step(cfg, tr, B)
    with pytest.raises(IllegalRadius):
        referee_step(cfg, tr, AliceMove.slab(Hyperplane.of((1,), F(1, 2)), F(1, 100)))


def test_config_checks():
    with pytest.raises(ConfigError):
        GameConfig(R1, F(1, 2))
    with pytest.raises(ConfigError):
        GameConfig(R1, F(1, 10), mode="bogus")
    with pytest.raises(ConfigError):
        Hyperplane.of((0, 0), 1)


def test_gamma_values():
    assert gamma_of(R1) == F(1, 3)
    assert gamma_of(SplittingStructure("middle_third")) == F(1, 45)


def test_zero_rounds():
    tr = play(GameConfig(R1, F(1, 10)), CenterStrategy(), rounds=0)
    assert len(tr.moves) == 1 and tr.outcome == Ball.root(R1)


def test_play_avoids_targets():
    targets = rationals_by_height(30)
    alice = avoid_countable(targets)
    tr = play(GameConfig(R1, F(1, 10)), alice, rounds=10)
    assert len(tr.bob_balls()) == 11
    end = tr.outcome
    lo, hi = end.bounds[0][0], end.bounds[1][0]
    processed = min(10, len(targets))
    assert not any(lo <= t <= hi for t in targets[:processed])
    d = tr.to_json()
    assert d["moves"][0]["player"] == "bob" and d["moves"][1]["player"] == "alice"


def test_avoid_moves():
    B = Ball.root(R1)
    m = avoid_countable([F(0)])(B, F(1, 10))
    assert m.center == (F(0),)
    m = avoid_countable([F(5)])(B, F(1, 10))
    assert m.center == B.center


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=4, max_value=12), st.sampled_from(["leftmost", "seeded", "greedy"]),
       st.integers(min_value=0, max_value=5))
def test_gamma_half_never_stuck(R, bob, seed):
    beta = gamma_of(R1) / 2
    tr = play(GameConfig(R1, beta), avoid_countable(rationals_by_height(20)), bob=bob, rounds=6, seed=seed)
    assert len(tr.bob_balls()) == 7


def test_oversized_strategy_breaks_legality():
    alice = ScaledStrategy(avoid_countable(rationals_by_height(10)), 2)
    with pytest.raises((IllegalRadius, LegalityBreach)):
        play(GameConfig(R1, F(1, 10)), alice, rounds=3)


def test_strategy_json_roundtrip():
    alice = avoid_countable([F(1, 3), F(2, 7)])
    back = strategy_from_json(alice.to_json())
    B = Ball.root(R1)
    assert back(B, F(1, 10)) == alice(B, F(1, 10))
    mv = AliceMove.slab(Hyperplane.of((1, 2), F(4, 5)), F(1, 50))
    assert AliceMove.from_json(mv.to_json()) == mv


def test_r_epsilon():
    assert r_epsilon(R1, F(1, 2)) == 9


def test_c_kN():
    assert c_kN(0, 2) == 9
    assert c_kN(1, 2, 10) == F(22, 5)


def test_compile_and_replay():
    alice = avoid_countable(rationals_by_height(20))
    B = Ball.root(R1)
    tree, sv = strategy_to_cantor(alice, B, 10, 4)
    assert all(v <= 3 for v in sv)
    assert tree.meta["within_packing"]
    rep = replay(tree, alice)
    assert rep["pass"] and rep["edges"] > 0
    cfg = GameConfig(R1, F(1, 10))
    tr = replay_path(cfg, alice, tree, 0)
    assert len(tr.bob_balls()) == 5


def test_compile_gamma_guard():
    with pytest.raises(ConfigError):
        strategy_to_cantor(CenterStrategy(), Ball.root(R1), 3, 2)


def test_haw_k0_matches_plain():
    alice = avoid_countable(rationals_by_height(10))
    B = Ball.root(R1)
    t1, sv1 = strategy_to_cantor(alice, B, 10, 3)
    t2, sv2, rep = haw_strategy_to_cantor(alice, B, 10, 3, k=0)
    assert sv1 == sv2 and rep["pass"]


def test_haw_axis_line():
    R2 = SplittingStructure("euclidean_box", N=2)
    alice = CenterStrategy(k=1, normal=(1, 0))
    tree, sv, rep = haw_strategy_to_cantor(alice, Ball.root(R2), 10, 2)
    assert rep["pass"]
    assert sv[0] % 10 == 0 and 10 <= sv[0] <= 30
