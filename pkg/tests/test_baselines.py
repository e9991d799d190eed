import math

import numpy as np
import pytest

from fisherplan.baselines import TransectDirection, random_walk, transect
from fisherplan.errors import InvalidCellError
from fisherplan.grid import Region, euclidean, neighbors


def _rc(reg, cells):
    return [divmod(c, reg.cols) for c in cells]


def test_transect_single_step(grid3):
    sp = transect(grid3, 4, "right", 1)
    assert _rc(grid3, sp.path) == [(1, 1), (1, 2)]
    assert sp.cost == 1.0


def test_transect_reflects_once(grid3):
    sp = transect(grid3, 4, TransectDirection.RIGHT, 3)
    assert _rc(grid3, sp.path) == [(1, 1), (1, 2), (2, 2), (2, 1)]
    assert sp.cost == 3.0


def test_transect_zero_budget(grid3):
    sp = transect(grid3, 4, "up", 0)
    assert sp.cells == (4,) and sp.cost == 0.0


def test_transect_reflection_prefers_roomier_side():
    reg = Region(5, 4)
    sp = transect(reg, reg.index(3, 1), "left", 10)
    # At column 0 there are 3 rows above and 1 below, so the walker steps up.
    assert _rc(reg, sp.path)[:4] == [(3, 1), (3, 0), (2, 0), (2, 1)]


def test_transect_stops_after_second_wall():
    reg = Region(2, 3)
    sp = transect(reg, 0, "right", 100)
    assert _rc(reg, sp.path) == [(0, 0), (0, 1), (0, 2), (1, 2), (1, 1), (1, 0)]
    assert sp.cost == 5.0


def test_transect_blocked_by_invalid_cell():
    reg = Region(3, 3, [1, 1, 1, 1, 1, 0, 1, 1, 1])
    sp = transect(reg, 3, "right", 5)
    assert _rc(reg, sp.path)[:3] == [(1, 0), (1, 1), (2, 1)]


def test_transect_geometry_invariants():
    reg = Region(8, 6)
    rng = np.random.default_rng(0)
    for _ in range(50):
        start = int(rng.integers(reg.size))
        d = TransectDirection(list(TransectDirection)[int(rng.integers(4))].value)
        b = float(rng.uniform(0, 20))
        sp = transect(reg, start, d, b)
        steps = [euclidean(reg, a, c) for a, c in zip(sp.path, sp.path[1:])]
        assert all(s == 1.0 for s in steps)
        assert sp.cost == len(steps) <= b
        assert len(set(sp.path)) == len(sp.path)


def test_transect_invalid_start():
    reg = Region(3, 3, [0, 1, 1, 1, 1, 1, 1, 1, 1])
    with pytest.raises(InvalidCellError):
        transect(reg, 0, "up", 3)
    with pytest.raises(ValueError):
        transect(reg, 1, "sideways", 3)


def test_random_walk_zero_budget():
    sp = random_walk(Region(4, 4), 5, 0, seed=1)
    assert sp.path == (5,) and sp.cost == 0.0


def test_random_walk_properties():
    reg = Region(10, 10)
    for seed in range(100):
        sp = random_walk(reg, 55, 5, seed)
        steps = [euclidean(reg, a, b) for a, b in zip(sp.path, sp.path[1:])]
        for a, b in zip(sp.path, sp.path[1:]):
            assert b in neighbors(reg, a)
        assert sum(steps) == pytest.approx(sp.cost, abs=1e-12)
        assert sp.cost <= 5
        assert 1 <= len(sp.cells) <= math.floor(5) + 1
        # Every cell has an orthogonal neighbour here, so the walk ends with < 1 left.
        assert 5 - sp.cost < 1


def test_random_walk_deterministic_and_seed_sensitive():
    reg = Region(10, 10)
    assert random_walk(reg, 0, 20, 7) == random_walk(reg, 0, 20, 7)
    assert len({random_walk(reg, 44, 20, s).path for s in range(10)}) > 1


def test_random_walk_boxed_in_revisits():
    reg = Region(1, 2)
    sp = random_walk(reg, 0, 3, 0)
    assert sp.path == (0, 1, 0, 1)
    assert sp.cells == (0, 1)
    assert sp.cost == 3.0
