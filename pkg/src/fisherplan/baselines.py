"""Transect and random-walk sampling baselines."""
from __future__ import annotations

import enum
import math

import numpy as np

from .grid import Region, neighbors
from .planner import SamplePlan


class TransectDirection(enum.Enum):
    UP = (-1, 0)
    DOWN = (1, 0)
    LEFT = (0, -1)
    RIGHT = (0, 1)

    @classmethod
    def parse(cls, name: str) -> "TransectDirection":
        try:
            return cls[name.upper()]
        except KeyError:
            raise ValueError(f"unknown transect direction {name!r}") from None


def _room(region: Region, r: int, c: int, dr: int, dc: int) -> int:
    """Steps available from (r, c) along (dr, dc) before leaving the grid."""
    if dr > 0:
        return region.rows - 1 - r
    if dr < 0:
        return r
    if dc > 0:
        return region.cols - 1 - c
    return c


def transect(region: Region, start: int, direction: TransectDirection | str, budget: float) -> SamplePlan:
    """Straight-line path from ``start`` with at most one reflection.

    When the next cell is off-grid or invalid, the walker steps once
    orthogonally (towards the side with more room, positive side on ties)
    and then heads back the opposite way.
    """
    if isinstance(direction, str):
        direction = TransectDirection.parse(direction)
    s = region.check_valid(start)
    dr, dc = direction.value
    r, c = divmod(s, region.cols)
    path = [s]
    cost = 0
    reflected = False

    def ok(rr, cc):
        return 0 <= rr < region.rows and 0 <= cc < region.cols and region.valid[rr * region.cols + cc]

    while cost + 1 <= budget:
        if ok(r + dr, c + dc):
            r, c = r + dr, c + dc
        elif not reflected:
            reflected = True
            # Orthogonal axis: rows when moving along columns and vice versa.
            a, b = (1, 0) if dr == 0 else (0, 1)
            sides = sorted([(a, b), (-a, -b)],
                           key=lambda o: (-_room(region, r, c, *o), -(o[0] + o[1])))
            for o in sides:
                if ok(r + o[0], c + o[1]):
                    r, c = r + o[0], c + o[1]
                    break
            else:
                break
            dr, dc = -dr, -dc
        else:
            break
        cost += 1
        path.append(r * region.cols + c)
    return SamplePlan(f"transect-{direction.name.lower()}", s, tuple(dict.fromkeys(path)),
                      tuple(path), float(cost), float(budget))


def random_walk(region: Region, start: int, budget: float, seed: int = 0) -> SamplePlan:
    """Random neighbour-to-neighbour path, preferring cells not yet visited.

    Steps cost their Euclidean length (1 or sqrt 2).  A neighbour is
    admissible when its step still fits the budget; the walk ends when none is.
    """
    s = region.check_valid(start)
    rng = np.random.default_rng(seed)
    path = [s]
    seen = {s}
    cost = 0.0
    cols = region.cols
    while True:
        cur = path[-1]
        r0, c0 = divmod(cur, cols)
        steps = []
        for n in neighbors(region, cur):
            r, c = divmod(n, cols)
            d = 1.0 if (r == r0 or c == c0) else math.sqrt(2.0)
            if cost + d <= budget:
                steps.append((n, d))
        if not steps:
            break
        fresh = [st for st in steps if st[0] not in seen]
        pool = fresh or steps
        n, d = pool[int(rng.integers(len(pool)))]
        path.append(n)
        seen.add(n)
        cost += d
    return SamplePlan("random", s, tuple(dict.fromkeys(path)), tuple(path), cost, float(budget))
