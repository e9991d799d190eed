"""Nearest-neighbour tour cost used as the planner's travel budget.

Distances are compared as exact integer squared distances so that ties are
detected exactly and broken by the lower cell index.  Tour costs are the
sequential sum of the Euclidean step lengths, accumulated in visiting order;
every routine here accumulates in the same order, so a cost obtained through
:func:`candidate_costs` is bit-identical to :func:`nn_cost` on the same set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from numba import njit

from .grid import Region

_BIG = np.iinfo(np.int64).max


@dataclass(frozen=True)
class Tour:
    order: tuple[int, ...]
    cost: float

    @property
    def start(self) -> int:
        return self.order[0]


@njit(cache=True)
def _walk(r, c, ids):
    """Greedy walk from point 0; returns visiting order, squared step lengths and cost."""
    n = r.size
    visited = np.zeros(n, dtype=np.bool_)
    order = np.empty(n, dtype=np.int64)
    step = np.zeros(n, dtype=np.int64)
    order[0] = 0
    visited[0] = True
    cur = 0
    cost = 0.0
    for s in range(1, n):
        best = -1
        bd = _BIG
        bid = _BIG
        for j in range(n):
            if visited[j]:
                continue
            dr = r[j] - r[cur]
            dc = c[j] - c[cur]
            d = dr * dr + dc * dc
            if d < bd or (d == bd and ids[j] < bid):
                best = j
                bd = d
                bid = ids[j]
        visited[best] = True
        order[s] = best
        step[s] = bd
        cost += math.sqrt(bd)
        cur = best
    return order, step, cost


@njit(cache=True)
def _candidate_costs(r, c, ids, cr, cc, cids, limit):
    """Cost of the walk over P + {x} for every candidate x.

    The walk over P + {x} coincides with the walk over P until the first step
    at which x is nearer (or equally near with a lower index) than the point
    the base walk picks; only the remainder is re-simulated.  Costs that exceed
    ``limit`` may be returned as a partial sum, which is still above ``limit``.
    """
    n = r.size
    order, step, _ = _walk(r, c, ids)
    m = cr.size
    out = np.empty(m)
    rem = np.zeros(n, dtype=np.bool_)
    for q in range(m):
        xr = cr[q]
        xc = cc[q]
        xid = cids[q]
        cost = 0.0
        div = n - 1
        for i in range(n - 1):
            a = order[i]
            dr = xr - r[a]
            dc = xc - c[a]
            d = dr * dr + dc * dc
            nxt = order[i + 1]
            if d < step[i + 1] or (d == step[i + 1] and xid < ids[nxt]):
                div = i
                break
            cost += math.sqrt(step[i + 1])
            if cost > limit:
                break
        if cost > limit:
            out[q] = cost
            continue
        a = order[div]
        dr = xr - r[a]
        dc = xc - c[a]
        cost += math.sqrt(dr * dr + dc * dc)
        # Remaining base points after the divergence, walked from x.
        left = n - 1 - div
        for j in range(n):
            rem[j] = False
        for i in range(div + 1, n):
            rem[order[i]] = True
        pr = xr
        pc = xc
        while left > 0 and cost <= limit:
            best = -1
            bd = _BIG
            bid = _BIG
            for j in range(n):
                if not rem[j]:
                    continue
                dr = r[j] - pr
                dc = c[j] - pc
                d = dr * dr + dc * dc
                if d < bd or (d == bd and ids[j] < bid):
                    best = j
                    bd = d
                    bid = ids[j]
            rem[best] = False
            cost += math.sqrt(bd)
            pr = r[best]
            pc = c[best]
            left -= 1
        out[q] = cost
    return out


def _points(region: Region, start: int, points: Iterable[int]) -> np.ndarray:
    s = region.check_valid(start)
    rest = sorted({region.check_valid(p) for p in points} - {s})
    return np.array([s] + rest, dtype=np.int64)


def nn_order(region: Region, start: int, points: Iterable[int]) -> Tour:
    """Nearest-neighbour visiting order of ``points`` from ``start``."""
    ids = _points(region, start, points)
    rc = region.coords(ids)
    order, _, cost = _walk(rc[:, 0].copy(), rc[:, 1].copy(), ids)
    return Tour(tuple(int(i) for i in ids[order]), float(cost))


def nn_cost(region: Region, start: int, points: Iterable[int]) -> float:
    return nn_order(region, start, points).cost


def candidate_costs(region: Region, start: int, points: Iterable[int], candidates,
                    limit: float = math.inf) -> np.ndarray:
    """``nn_cost(points | {x})`` for each ``x`` in ``candidates``.

    Candidates must be valid cells not already in ``points`` or equal to
    ``start``.  Entries above ``limit`` are only guaranteed to exceed it.
    """
    ids = _points(region, start, points)
    rc = region.coords(ids)
    cand = np.asarray(candidates, dtype=np.int64)
    cc = region.coords(cand)
    return _candidate_costs(rc[:, 0].copy(), rc[:, 1].copy(), ids,
                            cc[:, 0].copy(), cc[:, 1].copy(), cand, float(limit))
