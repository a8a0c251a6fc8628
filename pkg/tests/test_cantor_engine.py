import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cantorwin import cantor_engine as ce
from cantorwin.errors import BudgetExceeded, ConfigError, PreconditionREps, TrimCollapse
from cantorwin.splitting import Ball, SplittingStructure

F = Fraction


def root(kind="euclidean_box", N=1, p=0):
    s = SplittingStructure(kind, N=N, p=p)
    return s, Ball.root(s)


def test_tseq_single_cell():
    b = ce.BudgetMatrix.explicit(ce.parse_cells("0,0:2"), 2)
    ok, t = ce.nonempty_certificate(b, [9], 2)
    assert ok and t[0] == 7 and t[1] == 9


def test_tseq_hand_computed():
    # t0 = 4 - 1, t1 = 4 - 1 - 2/3, t2 = 4 - 1 - 0 - 1/(t0 t1)
    b = ce.BudgetMatrix.explicit({(0, 0): 1, (1, 1): 1, (0, 1): 2, (2, 2): 1, (0, 2): 1}, 2)
    t = ce.t_sequence(b, [4], 2)
    assert t[0] == 3 and t[1] == F(7, 3) and t[2] == 3 - F(1, 7)


def test_parse_cells_errors():
    with pytest.raises(ConfigError):
        ce.parse_cells("0:1")
    with pytest.raises(ConfigError):
        ce.BudgetMatrix.explicit({(2, 1): 1})


def test_cantor_winning_cells():
    b = ce.BudgetMatrix.cantor_winning(16, F(1, 2), 4)
    assert b.cell(0, 0) == (4, 4)
    assert b.floor(0, 1) == 16
    lo, hi = ce.BudgetMatrix.cantor_winning(10, F(1, 3), 2).cell(1, 1)
    assert lo ** 3 <= 100 <= hi ** 3 and lo < hi


def test_budget_json_roundtrip():
    b = ce.BudgetMatrix.explicit({(0, 0): F(3, 2), (0, 2): 5}, 3)
    b2 = ce.BudgetMatrix.from_json(json.loads(json.dumps(b.to_json())))
    assert all(b.cell(m, n) == b2.cell(m, n) for n in range(4) for m in range(n + 1))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 5), st.integers(1, 3), st.integers(0, 2 ** 16))
def test_encode_decode(u, N, seed):
    P = u ** 3
    rng = np.random.default_rng(seed)
    coords = rng.integers(0, P, size=(20, N))
    assert (ce.decode(ce.encode(coords, P, N), P, N).reshape(20, N) == coords).all()


@pytest.mark.parametrize("policy", ["greedy", "seeded"])
def test_construct_respects_budgets(policy):
    _, B = root()
    b = ce.BudgetMatrix.cantor_winning(16, F(1, 2), 3)
    tree = ce.construct(B, 16, b, ce.make_oracle(policy, 1), 3)
    assert ce.budget_compliance(tree, b)["pass"]
    assert tree.empty_level is None


def test_greedy_count_matches_materialized_tree():
    _, B = root()
    b = ce.BudgetMatrix.cantor_winning(16, F(1, 2), 4)
    tree = ce.construct(B, 16, b, ce.GreedyOracle(), 4)
    assert ce.greedy_count([16], b.floor, 4) == tree.sizes()


def test_null_oracle_gives_full_grid():
    _, B = root("euclidean_box", 2)
    tree = ce.construct(B, 3, None, ce.NullOracle(), 3)
    assert tree.sizes() == [1, 9, 81, 729]


def test_remove_all_empties_the_tree():
    _, B = root()
    tree = ce.construct(B, 4, ce.BudgetMatrix.local([4, 4]), ce.RemoveAllOracle(), 2)
    assert tree.empty_level == 1


def test_bad_oracle_is_caught():
    _, B = root()
    b = ce.BudgetMatrix.local([1, 1, 1])
    cheat = ce.FunctionOracle(lambda n, m, anc, cands: list(range(len(cands))))
    with pytest.raises(BudgetExceeded):
        ce.construct(B, 4, b, cheat, 2)


def test_tree_json_roundtrip():
    _, B = root("padic", 1, 3)
    b = ce.BudgetMatrix.local([1, 2, 1])
    tree = ce.construct(B, 3, b, ce.SeededOracle(4), 3)
    again = ce.CantorTree.from_json(json.loads(json.dumps(tree.to_json(), default=str)))
    assert again.sizes() == tree.sizes()
    for n in range(4):
        assert ce.region_set(again, n) == ce.region_set(tree, n)


def test_local_trim_half_children():
    _, B = root()
    b = ce.BudgetMatrix.cantor_winning(16, F(1, 2), 3)
    tree = ce.construct(B, 16, b, ce.SeededOracle(2), 3)
    tr = ce.local_trim(tree)
    for n in range(tr.depth):
        kids = np.bincount(tr.parents[n + 1], minlength=tr.size(n))
        assert (2 * kids >= 16).all()


def test_local_trim_collapse():
    _, B = root()
    tree = ce.construct(B, 4, ce.BudgetMatrix.local([3, 3, 3]), ce.SeededOracle(0), 2)
    with pytest.raises(TrimCollapse):
        ce.local_trim(tree)


def test_intersect_sums_cells():
    a = ce.BudgetMatrix.explicit({(0, 0): 1}, 1)
    b = ce.BudgetMatrix.explicit({(0, 0): F(1, 2), (0, 1): 2}, 1)
    s = ce.intersect_budgets([a, b])
    assert s.upper(0, 0) == F(3, 2) and s.upper(0, 1) == 2 and s.floor(0, 0) == 1


def test_reindex_power_cells():
    coarse = ce.BudgetMatrix.explicit({(0, 0): 3, (0, 1): 5, (1, 1): 2}, 1)
    fine = ce.reindex_power(coarse, 2)
    # coarse cell (m, n) moves to (2m, 2n+1); everything else is zero
    assert fine.upper(0, 1) == 3 and fine.upper(0, 3) == 5 and fine.upper(2, 3) == 2
    assert fine.upper(0, 0) == 0 and fine.upper(1, 1) == 0 and fine.upper(3, 3) == 0


def test_reindex_equivalence_small():
    _, B = root()
    coarse = ce.BudgetMatrix.cantor_winning(16, F(1, 2), 2)
    t1 = ce.construct(B, 16, coarse, ce.SeededOracle(9), 2)
    t2 = ce.construct(B, 4, ce.reindex_power(coarse, 2), ce.reindex_oracle(ce.SeededOracle(9), 2, [16, 16]), 4)
    assert all(ce.region_set(t1, n) == ce.region_set(t2, 2 * n) for n in range(3))


def test_combine_preconditions():
    with pytest.raises(ConfigError):
        ce.cantor_winning_combine(F(1, 2), F(1, 5), 256, [1, 2])
    _, cert = ce.cantor_winning_combine(F(1, 2), F(3, 8), 256, [1, 2, 3], depth=4)
    assert cert["pass"]


def test_dim_lower_bound_local_route():
    s, _ = root()
    rep = ce.dim_lower_bound(s, 16, ce.BudgetMatrix.local([1] * 7), 6)
    assert rep["certified"] and rep["s_exact"] == F(3, 4)
    mt = SplittingStructure("middle_third")
    rep = ce.dim_lower_bound(mt, 3, ce.BudgetMatrix.local([0] * 5), 4)
    assert not rep["conditions"]["f_at_least_4"]["pass"]


def test_canonical_measure_sums():
    _, B = root("euclidean_box", 2)
    tree = ce.construct(B, 3, ce.BudgetMatrix.local([2, 3, 1]), ce.SeededOracle(5), 3)
    mu = ce.canonical_measure(tree)
    assert all(mu.level_sum(n) == 1 for n in range(4))
    assert mu.ball_mass_check()["pass"]


def test_frontier_expansion():
    _, B = root()
    tree = ce.construct(B, 10, None, ce.NullOracle(), 3, expand=("leftmost", 2))
    assert tree.sizes() == [1, 10, 20, 20]
    assert tree.has_frontier
