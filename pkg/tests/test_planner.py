import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import det_logdet
from fisherplan.cost import nn_cost
from fisherplan.errors import DataError, FormatError, InvalidCellError
from fisherplan.grid import Region
from fisherplan.planner import (PlannerConfig, chol_update, fisher_info, plan, read_plan, seed_cells,
                                state_init, state_with_cell, write_plan)

EPS = 1e-9


def test_fisher_identity_columns():
    Y = np.eye(2)
    assert fisher_info(Y, [0, 1], EPS) == pytest.approx(2 * math.log1p(EPS), abs=1e-15)
    assert fisher_info(Y, [0, 1], 1e-300) == pytest.approx(0.0, abs=1e-15)


def test_fisher_against_determinant():
    Y = np.array([[1.0, 1.0], [0.0, 1.0]])
    assert fisher_info(Y, [0, 1], EPS) == pytest.approx(det_logdet(Y, [0, 1], EPS), abs=1e-12)
    assert abs(fisher_info(Y, [0, 1], EPS)) < 1e-8       # det [[2,1],[1,1]] = 1
    Yd = np.array([[1.0, 1.0], [0.0, 0.0]])
    # Same column in two cells: det [[2+eps, 0], [0, eps]].
    want = math.log((2 + EPS) * EPS)
    assert fisher_info(Yd, [0, 1], EPS) == pytest.approx(want, rel=1e-12)
    assert want == pytest.approx(math.log(2) + math.log(EPS), rel=1e-9)


def test_fisher_errors():
    with pytest.raises(IndexError):
        fisher_info(np.eye(2), [2])
    with pytest.raises(DataError):
        fisher_info(np.eye(2), [])
    with pytest.raises(DataError):
        fisher_info(np.eye(2), [0], 0.0)


def test_chol_update_matches_factorization():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((5, 5))
    M = A @ A.T + np.eye(5)
    x = rng.standard_normal(5)
    L = chol_update(np.linalg.cholesky(M), x)
    assert np.allclose(L, np.linalg.cholesky(M + np.outer(x, x)), atol=1e-12)
    assert np.allclose(np.triu(L, 1), 0)


def test_incremental_state_matches_from_scratch():
    # Sequences start from a full-rank k-cell seed, as the planner's do.
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(100):
        k, L = 4, 30
        Y = rng.standard_normal((k, L))
        cells = rng.choice(L, size=int(rng.integers(k + 1, 21)), replace=False)
        st_ = state_init(Y, cells[:k], EPS)
        for i in range(k + 1, cells.size + 1):
            nxt = state_with_cell(st_, Y, cells[i - 1])
            assert nxt.logdet >= st_.logdet
            assert st_.members == tuple(int(x) for x in cells[:i - 1])   # original untouched
            st_ = nxt
            ref = state_init(Y, cells[:i], EPS)
            worst = max(worst, abs(st_.logdet - ref.logdet), abs(st_.logdet - fisher_info(Y, cells[:i], EPS)))
            assert np.allclose(st_.chol, ref.chol, atol=1e-8)
    assert worst < 1e-8


def test_incremental_state_below_full_rank():
    # With fewer cells than k the jitter directions carry ~1e-7 relative rounding
    # in any formation of M, so agreement is only to that level.
    rng = np.random.default_rng(2)
    Y = rng.standard_normal((4, 10))
    st_ = state_init(Y, [0], EPS)
    for i in range(1, 4):
        st_ = state_with_cell(st_, Y, i)
        assert abs(st_.logdet - fisher_info(Y, range(i + 1), EPS)) < 1e-5


def test_zero_column_adds_nothing():
    rng = np.random.default_rng(2)
    Y = np.hstack([rng.standard_normal((3, 4)), np.zeros((3, 1))])
    s = state_init(Y, [0, 1, 2], EPS)
    assert abs(state_with_cell(s, Y, 4).logdet - s.logdet) < 1e-12
    assert s.gains(Y[:, [4]])[0] == 0.0


def test_logdet_consistent_with_chol():
    rng = np.random.default_rng(3)
    Y = rng.standard_normal((3, 8))
    s = state_init(Y, range(8), EPS)
    assert s.logdet == pytest.approx(np.linalg.slogdet(s.M)[1], abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_monotone_and_submodular(seed):
    rng = np.random.default_rng(seed)
    k, L = int(rng.integers(1, 5)), int(rng.integers(3, 31))
    Y = rng.standard_normal((k, L))
    perm = rng.permutation(L)
    nb = int(rng.integers(1, L))
    B = list(perm[:nb])
    A = B[: int(rng.integers(1, nb + 1))]
    x = int(perm[nb])
    gA = fisher_info(Y, A + [x], EPS) - fisher_info(Y, A, EPS)
    gB = fisher_info(Y, B + [x], EPS) - fisher_info(Y, B, EPS)
    assert gA >= -1e-12 and gB >= -1e-12
    assert gA >= gB - 1e-9


def test_seed_cells():
    reg = Region(4, 4)
    assert seed_cells(reg, 5, 1) == [5]
    assert seed_cells(reg, 5, 5) == [5, 1, 4, 6, 9]
    assert seed_cells(reg, 0, 3) == [0, 1, 4]
    holed = Region(3, 3, [1, 0, 1, 1, 1, 1, 1, 1, 1])
    assert seed_cells(holed, 0, 2) == [0, 3]


def test_plan_budget_zero():
    reg = Region(3, 3)
    Y = np.random.default_rng(0).standard_normal((1, 9))
    sp = plan(Y, reg, 4, PlannerConfig(budget=0))
    assert sp.cells == (4,) and sp.path == (4,) and sp.cost == 0.0 and not sp.over_budget
    assert sp.fisher == fisher_info(Y, [4], EPS)


def test_plan_over_budget_seed_is_flagged():
    reg = Region(5, 5)
    Y = np.random.default_rng(0).standard_normal((5, 25))
    sp = plan(Y, reg, 12, PlannerConfig(budget=5))
    assert sp.over_budget
    assert sp.cells == sp.init_cells == tuple(seed_cells(reg, 12, 5))
    assert sp.cost == pytest.approx(1 + 3 * math.sqrt(2))


def _best_feasible_gain(Y, reg, start, budget):
    seed = seed_cells(reg, start, Y.shape[0])
    base = fisher_info(Y, seed, EPS)
    rest = [c for c in range(reg.L) if c not in seed]
    best = base
    # Any m distinct cells need a tour of length >= m - 1.
    for m in range(0, int(budget) + 2 - len(seed)):
        for extra in itertools.combinations(rest, m):
            if nn_cost(reg, start, seed[1:] + list(extra)) <= budget:
                best = max(best, fisher_info(Y, seed + list(extra), EPS))
    return base, best


def test_greedy_within_guarantee_4x4():
    reg = Region(4, 4)
    Y = np.random.default_rng(7).standard_normal((2, 16))
    sp = plan(Y, reg, 5, PlannerConfig(budget=4))
    base, best = _best_feasible_gain(Y, reg, 5, 4)
    assert sp.cost <= 4
    assert sp.fisher - base >= 0.316 * (best - base) - 1e-9


def test_zero_information_cell_never_chosen():
    reg = Region(1, 8)
    rng = np.random.default_rng(4)
    Y = rng.standard_normal((2, 8))
    Y[:, 2] = 0.0
    sp = plan(Y, reg, 0, PlannerConfig(budget=7))
    assert 2 not in sp.cells
    assert len(sp.cells) > 2


def test_plan_invariants_random():
    rng = np.random.default_rng(5)
    for t in range(30):
        reg = Region(7, 8, rng.random(56) > 0.2)
        k = int(rng.integers(1, 4))
        Y = rng.standard_normal((k, reg.L))
        start = int(rng.choice(reg.cells))
        b = float(rng.uniform(0, 12))
        sp = plan(Y, reg, start, PlannerConfig(budget=b))
        assert sp.start == start and sp.cells[0] == start
        assert len(set(sp.cells)) == len(sp.cells)
        assert sorted(sp.path) == sorted(sp.cells)
        assert all(reg.is_valid(c) for c in sp.cells)
        assert sp.cost == nn_cost(reg, start, sp.cells)
        if sp.over_budget:
            assert sp.cells == sp.init_cells and sp.cost > b
        else:
            assert sp.cost <= b
        assert sp.fisher == pytest.approx(fisher_info(Y, reg.compact(list(sp.cells)), EPS), abs=1e-12)
        assert plan(Y, reg, start, PlannerConfig(budget=b)) == sp


def test_candidate_pool_is_reproducible():
    reg = Region(10, 10)
    Y = np.random.default_rng(6).standard_normal((3, 100))
    cfg = PlannerConfig(budget=15, candidate_pool=10, seed=3)
    a, b = plan(Y, reg, 44, cfg), plan(Y, reg, 44, cfg)
    assert a == b and a.cost <= 15


def test_plan_rejects_bad_inputs():
    reg = Region(3, 3, [1, 1, 1, 1, 0, 1, 1, 1, 1])
    Y = np.ones((1, 8))
    with pytest.raises(InvalidCellError):
        plan(Y, reg, 4)
    with pytest.raises(DataError):
        plan(np.ones((1, 9)), reg, 0)
    with pytest.raises(DataError):
        PlannerConfig(jitter=0)


def test_plan_file_round_trip(tmp_path):
    reg = Region(6, 6)
    Y = np.random.default_rng(0).standard_normal((2, 36))
    sp = plan(Y, reg, 14, PlannerConfig(budget=8))
    p = tmp_path / "plan.csv"
    write_plan(sp, reg, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "order,cell_index,row,col"
    assert lines[1] == "0,14,2,2"
    assert any(ln.startswith("# cost=") and "budget=8.0" in ln and "fisher=" in ln for ln in lines)
    back = read_plan(p, reg)
    assert back.path == sp.path and back.cost == sp.cost and back.fisher == sp.fisher
    p.write_text(p.read_text().replace("0,14,2,2", "0,14,2,3"))
    with pytest.raises(FormatError, match="line 2"):
        read_plan(p, reg)
