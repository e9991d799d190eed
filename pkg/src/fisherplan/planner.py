"""Fisher information of cell sets and the budgeted greedy sampling planner."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solve_triangular

from .cost import candidate_costs, nn_order
from .errors import DataError, FormatError
from .grid import Region


def fisher_info(Y, cells, jitter: float = 1e-9) -> float:
    """``log det(jitter*I + sum_p Y[:, p] Y[:, p].T)`` over the columns ``cells``."""
    if not jitter > 0:
        raise DataError("jitter must be positive")
    Y = np.asarray(Y, dtype=float)
    cols = np.asarray(sorted(set(int(c) for c in cells)), dtype=np.int64)
    if cols.size == 0:
        raise DataError("fisher_info needs at least one cell")
    if cols[0] < 0 or cols[-1] >= Y.shape[1]:
        raise IndexError(f"cell outside 0..{Y.shape[1] - 1}")
    Ys = Y[:, cols]
    sign, logdet = np.linalg.slogdet(jitter * np.eye(Y.shape[0]) + Ys @ Ys.T)
    return float(logdet)


def chol_update(chol: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of ``chol @ chol.T + outer(x, x)`` (returns a new array)."""
    L = np.array(chol, dtype=float, copy=True)
    x = np.array(x, dtype=float, copy=True)
    n = x.size
    for i in range(n):
        r = math.hypot(L[i, i], x[i])
        c = r / L[i, i]
        s = x[i] / L[i, i]
        L[i, i] = r
        if i + 1 < n:
            L[i + 1:, i] = (L[i + 1:, i] + s * x[i + 1:]) / c
            x[i + 1:] = c * x[i + 1:] - s * L[i + 1:, i]
    return L


@dataclass(frozen=True, eq=False)
class FisherState:
    """Jittered Fisher matrix of a member set with its Cholesky factor."""

    M: np.ndarray
    chol: np.ndarray
    members: tuple = ()
    jitter: float = 1e-9

    @property
    def k(self) -> int:
        return self.M.shape[0]

    @property
    def logdet(self) -> float:
        return float(2.0 * np.sum(np.log(np.diag(self.chol))))

    def gains(self, Ycols: np.ndarray) -> np.ndarray:
        """Increase in log-det from adding each column of ``Ycols`` on its own."""
        Z = solve_triangular(self.chol, Ycols, lower=True, check_finite=False)
        return np.log1p(np.sum(Z * Z, axis=0))


def state_init(Y, cells, jitter: float = 1e-9) -> FisherState:
    if not jitter > 0:
        raise DataError("jitter must be positive")
    Y = np.asarray(Y, dtype=float)
    cols = [int(c) for c in cells]
    for c in cols:
        if not 0 <= c < Y.shape[1]:
            raise IndexError(f"cell {c} outside 0..{Y.shape[1] - 1}")
    Ys = Y[:, cols]
    M = jitter * np.eye(Y.shape[0]) + Ys @ Ys.T
    return FisherState(M, np.linalg.cholesky(M), tuple(cols), jitter)


def state_with_cell(state: FisherState, Y, cell: int) -> FisherState:
    Y = np.asarray(Y, dtype=float)
    c = int(cell)
    if not 0 <= c < Y.shape[1]:
        raise IndexError(f"cell {c} outside 0..{Y.shape[1] - 1}")
    y = Y[:, c]
    return FisherState(state.M + np.outer(y, y), chol_update(state.chol, y),
                       state.members + (c,), state.jitter)


@dataclass(frozen=True)
class PlannerConfig:
    budget: float = 50.0
    jitter: float = 1e-9
    info_tol: float = 1e-12
    candidate_pool: int | None = None
    seed: int = 0
    cost_floor: float = 1e-9

    def __post_init__(self):
        if self.budget < 0 or not math.isfinite(self.budget):
            raise DataError("budget must be a finite nonnegative number")
        if not self.jitter > 0:
            raise DataError("jitter must be positive")
        if self.info_tol < 0:
            raise DataError("info_tol must be nonnegative")
        if self.candidate_pool is not None and self.candidate_pool < 1:
            raise DataError("candidate_pool must be positive")
        if not self.cost_floor > 0:
            raise DataError("cost_floor must be positive")


@dataclass(frozen=True)
class SamplePlan:
    """Sampling cells chosen by one method.

    ``cells`` are the distinct grid cells in the order they were added;
    ``path`` is the travel order (for random walks it may revisit cells) and
    ``cost`` its length.
    """

    method: str
    start: int
    cells: tuple[int, ...]
    path: tuple[int, ...]
    cost: float
    budget: float
    fisher: float | None = None
    init_cells: tuple[int, ...] = ()
    over_budget: bool = False

    def with_fisher(self, Y, region: Region, jitter: float = 1e-9) -> "SamplePlan":
        return replace(self, fisher=fisher_info(Y, region.compact(list(self.cells)), jitter))


def seed_cells(region: Region, start: int, k: int) -> list[int]:
    """``start`` followed by its ``k - 1`` nearest valid cells (ties by lower index)."""
    s = region.check_valid(start)
    cells = region.cells
    rc = region.coords(cells)
    r0, c0 = divmod(s, region.cols)
    d2 = (rc[:, 0] - r0) ** 2 + (rc[:, 1] - c0) ** 2
    order = np.lexsort((cells, d2))
    near = [int(cells[i]) for i in order if cells[i] != s][: k - 1]
    return [s] + near


def plan(Y, region: Region, start: int, cfg: PlannerConfig = PlannerConfig()) -> SamplePlan:
    """Greedy cost-benefit selection of sampling cells under a tour budget.

    Starts from the seed set (``start`` plus its ``k - 1`` nearest cells) and
    repeatedly adds the cell with the largest ratio of Fisher information gain
    to increase in nearest-neighbour tour cost, among cells whose addition
    keeps the tour within budget.  Stops when no ratio exceeds ``info_tol``.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.shape[1] != region.L:
        raise DataError(f"Y has {Y.shape[1]} columns, region has {region.L} valid cells")
    k = Y.shape[0]
    members = seed_cells(region, start, k)
    init = tuple(members)
    state = state_init(Y, region.compact(members), cfg.jitter)
    tour = nn_order(region, members[0], members[1:])
    cost = tour.cost

    if cost > cfg.budget:
        return SamplePlan("greedy", members[0], init, tour.order, cost, cfg.budget,
                          fisher_info(Y, region.compact(members), cfg.jitter), init, True)

    rng = np.random.default_rng(cfg.seed)
    taken = np.zeros(region.L, dtype=bool)
    taken[region.compact(members)] = True
    while True:
        cand = np.flatnonzero(~taken)
        if cfg.candidate_pool is not None and cfg.candidate_pool < cand.size:
            cand = np.sort(rng.choice(cand, cfg.candidate_pool, replace=False))
        if cand.size == 0:
            break
        costs = candidate_costs(region, members[0], members[1:], region.expand(cand), limit=cfg.budget)
        feasible = costs <= cfg.budget
        if not feasible.any():
            break
        gains = state.gains(Y[:, cand])
        ratio = np.zeros(cand.size)
        ratio[feasible] = gains[feasible] / np.maximum(costs[feasible] - cost, cfg.cost_floor)
        j = int(np.argmax(ratio))
        if not ratio[j] > cfg.info_tol:
            break
        best = int(cand[j])
        members.append(int(region.expand(best)))
        taken[best] = True
        state = state_with_cell(state, Y, best)
        cost = float(costs[j])

    tour = nn_order(region, members[0], members[1:])
    assert tour.cost == cost, "incremental tour cost drifted from the from-scratch walk"
    return SamplePlan("greedy", members[0], tuple(members), tour.order, tour.cost, cfg.budget,
                      fisher_info(Y, region.compact(members), cfg.jitter), init, False)


# ------------------------------------------------------------------ plan files

PLAN_HEADER = "order,cell_index,row,col"


def write_plan(sp: SamplePlan, region: Region, path) -> None:
    fisher = "nan" if sp.fisher is None else repr(float(sp.fisher))
    with open(path, "w") as f:
        f.write(PLAN_HEADER + "\n")
        for i, c in enumerate(sp.path):
            r, col = divmod(c, region.cols)
            f.write(f"{i},{c},{r},{col}\n")
        f.write(f"# cost={sp.cost!r} budget={float(sp.budget)!r} fisher={fisher}\n")
        f.write(f"# method={sp.method} over_budget={int(sp.over_budget)}\n")


def read_plan(path, region: Region) -> SamplePlan:
    lines = open(path).read().splitlines()
    if not lines or lines[0].strip() != PLAN_HEADER:
        raise FormatError(f"{path}: line 1: expected header {PLAN_HEADER!r}")
    seq, meta = [], {}
    for n, ln in enumerate(lines[1:], start=2):
        ln = ln.strip()
        if not ln:
            continue
        if ln.startswith("#"):
            for tok in ln[1:].split():
                key, _, val = tok.partition("=")
                meta[key] = val
            continue
        parts = ln.split(",")
        try:
            order, cell, r, c = (int(p) for p in parts)
        except ValueError:
            raise FormatError(f"{path}: line {n}: expected 4 integers") from None
        if order != len(seq) or not region.is_valid(cell) or divmod(cell, region.cols) != (r, c):
            raise FormatError(f"{path}: line {n}: inconsistent plan row")
        seq.append(cell)
    if not seq:
        raise FormatError(f"{path}: plan lists no cells")
    try:
        cost = float(meta.get("cost", "nan"))
        budget = float(meta.get("budget", "nan"))
        fisher = float(meta.get("fisher", "nan"))
    except ValueError:
        raise FormatError(f"{path}: malformed footer") from None
    return SamplePlan(meta.get("method", "file"), seq[0], tuple(dict.fromkeys(seq)), tuple(seq),
                      cost, budget, None if math.isnan(fisher) else fisher, (),
                      meta.get("over_budget", "0") == "1")
