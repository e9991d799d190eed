"""Synthetic datasets, observation simulation, error metrics and the trial protocol."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .baselines import random_walk, transect
from .errors import DataError
from .glrm import LowRankModel, ObservationSet, UnderdeterminedWarning, complete
from .grid import Region, Snapshot
from .planner import PlannerConfig, SamplePlan, fisher_info, plan

METHODS = ("greedy", "transect-up", "transect-down", "transect-left", "transect-right", "random")


@dataclass(frozen=True)
class SynthConfig:
    rows: int = 30
    cols: int = 30
    rank: int = 5
    T_train: int = 24
    T_test: int = 6
    noise_sigma: float = 0.05
    missing_prob: float = 0.2
    smoothness: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise DataError("grid must be at least 1x1")
        if self.T_train < 1 or self.T_test < 1:
            raise DataError("snapshot counts must be positive")
        if not 1 <= self.rank <= min(self.rows * self.cols, self.T_train):
            raise DataError("rank must lie in 1..min(L, T_train)")
        if self.noise_sigma < 0:
            raise DataError("noise_sigma must be nonnegative")
        if not 0 <= self.missing_prob < 1:
            raise DataError("missing_prob must lie in [0, 1)")
        if self.smoothness < 1:
            raise DataError("smoothness must be positive")


@dataclass(frozen=True)
class Dataset:
    """Train and test snapshots over one region.

    ``truth`` holds the noise-free, fully observed version of each test snapshot.
    """

    region: Region
    train: list
    test: list
    truth: list = field(default_factory=list)


def _cosine_basis(rows: int, cols: int, a: int, b: int) -> np.ndarray:
    r = np.cos(np.pi * a * (np.arange(rows) + 0.5) / rows)
    c = np.cos(np.pi * b * (np.arange(cols) + 0.5) / cols)
    return np.outer(r, c).reshape(-1)


def synth_generate(cfg: SynthConfig) -> Dataset:
    """Low-rank field built from smooth cosine mixtures, plus noisy gappy copies."""
    region = Region(cfg.rows, cfg.cols)
    L = region.L
    k = cfg.rank
    rng = np.random.default_rng(cfg.seed)
    F = max(3, math.ceil(math.sqrt(max(cfg.smoothness, k))))
    freqs = [(a, b) for a in range(F) for b in range(F)
             if a < max(cfg.rows, 1) and b < max(cfg.cols, 1)]
    n_basis = min(cfg.smoothness, len(freqs))
    for _ in range(100):
        Y = np.zeros((k, L))
        for j in range(k):
            pick = rng.choice(len(freqs), size=n_basis, replace=False)
            w = rng.uniform(0.2, 1.0, size=n_basis)
            Y[j] = sum(wi * _cosine_basis(cfg.rows, cfg.cols, *freqs[p]) for wi, p in zip(w, pick))
        s = np.linalg.svd(Y, compute_uv=False)
        if s[-1] > 1e-6 * s[0]:
            break
    else:
        raise DataError("could not draw a full-rank spatial basis; raise smoothness or the grid size")
    T = cfg.T_train + cfg.T_test
    X = rng.standard_normal((k, T))
    truth = X.T @ Y
    noisy = truth + cfg.noise_sigma * rng.standard_normal(truth.shape)
    noisy[rng.random(truth.shape) < cfg.missing_prob] = np.nan
    snaps = [Snapshot(region, row) for row in noisy]
    return Dataset(region, snaps[:cfg.T_train], snaps[cfg.T_train:],
                   [Snapshot(region, row) for row in truth[cfg.T_train:]])


def simulate_observations(snapshot: Snapshot, sp: SamplePlan) -> ObservationSet:
    """Present values of ``snapshot`` at every cell of the plan."""
    region = snapshot.region
    cells = np.asarray(sp.cells, dtype=np.int64)
    for c in sp.cells:
        if not region.is_valid(c):
            raise DataError(f"plan cell {c} is not part of the snapshot's region")
    vals = snapshot.values[region.compact(cells)]
    keep = ~np.isnan(vals)
    return ObservationSet(cells[keep], vals[keep])


def reconstruction_error(pred: Snapshot, truth: Snapshot, sampled: Iterable[int] = (),
                         include_sampled: bool = False) -> float:
    """Mean squared error over cells present in ``truth``; sampled cells skipped by default."""
    if pred.region != truth.region:
        raise DataError("prediction and truth are over different regions")
    use = truth.present & ~np.isnan(pred.values)
    sampled = list(sampled)
    if sampled and not include_sampled:
        use[truth.region.compact(sampled)] = False
    if not use.any():
        return math.nan
    d = pred.values[use] - truth.values[use]
    return float(np.mean(d * d))


def error_heatmap(pred: Snapshot, truth: Snapshot) -> Snapshot:
    """Per-cell absolute error, missing where ``truth`` is missing."""
    if pred.region != truth.region:
        raise DataError("prediction and truth are over different regions")
    return Snapshot(truth.region, np.abs(pred.values - truth.values))


def choose_starts(region: Region, n: int, seed: int = 0) -> list[int]:
    n = min(n, region.L)
    rng = np.random.default_rng(seed)
    return [int(c) for c in rng.choice(region.cells, size=n, replace=False)]


@dataclass(frozen=True)
class TrialReport:
    method: str
    budget: float
    start: int
    repeat: int
    n_obs: int
    fisher: float
    recon_mse: float | None
    excluded: bool

    def key(self):
        return (self.method, self.budget, self.start, self.repeat)


@dataclass(frozen=True)
class Aggregate:
    method: str
    budget: float
    mean_fisher: float
    se_fisher: float
    mean_mse: float
    se_mse: float
    n_trials: int


def _mean_se(x: Sequence[float]) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return math.nan, math.nan
    if x.size == 1:
        return float(x[0]), math.nan
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def make_plan(method: str, model: LowRankModel, region: Region, start: int, budget: float,
              seed: int = 0, planner: PlannerConfig | None = None) -> SamplePlan:
    """Build a plan with any of :data:`METHODS`."""
    if method == "greedy":
        cfg = planner or PlannerConfig()
        return plan(model.Y, region, start, PlannerConfig(
            budget=budget, jitter=cfg.jitter, info_tol=cfg.info_tol,
            candidate_pool=cfg.candidate_pool, seed=cfg.seed, cost_floor=cfg.cost_floor))
    if method.startswith("transect-"):
        return transect(region, start, method.split("-", 1)[1], budget)
    if method == "random":
        return random_walk(region, start, budget, seed)
    raise DataError(f"unknown method {method!r}")


def evaluate_plan(sp: SamplePlan, dataset: Dataset, model: LowRankModel, jitter: float = 1e-9,
                  min_obs: int = 10, repeat: int = 0) -> TrialReport:
    region = dataset.region
    fisher = fisher_info(model.Y, region.compact(list(sp.cells)), jitter)
    counts, errs = [], []
    for snap in dataset.test:
        obs = simulate_observations(snap, sp)
        counts.append(len(obs))
        if len(obs) == 0:
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UnderdeterminedWarning)
            pred = complete(model, obs, region)
        errs.append(reconstruction_error(pred, snap, sp.cells))
    errs = [e for e in errs if not math.isnan(e)]
    n_obs = min(counts) if counts else 0
    return TrialReport(sp.method, float(sp.budget), sp.start, repeat, n_obs, fisher,
                       float(np.mean(errs)) if errs else None, n_obs < min_obs)


def run_trials(dataset: Dataset, model: LowRankModel, methods: Sequence[str] = METHODS,
               budgets: Sequence[float] = (5, 50, 200), starts: Sequence[int] = (),
               min_obs: int = 10, rng_seed: int = 0, n_random: int = 70,
               planner: PlannerConfig | None = None) -> list[TrialReport]:
    """Run every (method, budget, start) condition; random walks repeat ``n_random`` times."""
    region = dataset.region
    if model.L != region.L:
        raise DataError(f"model has {model.L} cells, dataset region has {region.L}")
    if not dataset.test:
        raise DataError("dataset has no test snapshots")
    for m in methods:
        if m not in METHODS:
            raise DataError(f"unknown method {m!r}")
    jitter = (planner or PlannerConfig()).jitter
    rows = []
    for bi, b in enumerate(budgets):
        for s in starts:
            for m in methods:
                reps = n_random if m == "random" else 1
                for rep in range(reps):
                    seed = int(np.random.SeedSequence([rng_seed, bi, int(s), rep]).generate_state(1)[0])
                    sp = make_plan(m, model, region, int(s), float(b), seed, planner)
                    rows.append(evaluate_plan(sp, dataset, model, jitter, min_obs, rep))
    rows.sort(key=TrialReport.key)
    return rows


def aggregate(rows: Sequence[TrialReport], methods: Sequence[str] = METHODS,
              budgets: Sequence[float] | None = None) -> list[Aggregate]:
    """Mean and standard error per (method, budget) over non-excluded trials.

    Every requested (method, budget) pair gets a row, with ``n_trials = 0``
    and NaN statistics when all of its trials were excluded.
    """
    if budgets is None:
        budgets = sorted({r.budget for r in rows})
    out = []
    for m in methods:
        for b in budgets:
            kept = [r for r in rows if r.method == m and r.budget == float(b) and not r.excluded]
            mf, sf = _mean_se([r.fisher for r in kept])
            mm, sm = _mean_se([r.recon_mse for r in kept if r.recon_mse is not None])
            out.append(Aggregate(m, float(b), mf, sf, mm, sm, len(kept)))
    return out


def complete_condition(dataset: Dataset, model: LowRankModel) -> float:
    """Mean MSE when each test snapshot is completed from all of its present cells."""
    errs = []
    for snap in dataset.test:
        present = dataset.region.cells[snap.present]
        if present.size == 0:
            continue
        obs = ObservationSet(present, snap.values[snap.present])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UnderdeterminedWarning)
            pred = complete(model, obs, dataset.region)
        errs.append(reconstruction_error(pred, snap, include_sampled=True))
    return float(np.mean(errs)) if errs else math.nan


# ----------------------------------------------------------------- CSV output

REPORT_HEADER = ["method", "budget", "start_index", "repeat", "n_obs", "fisher", "recon_mse", "excluded"]
AGGREGATE_HEADER = ["method", "budget", "mean_fisher", "se_fisher", "mean_mse", "se_mse", "n_trials"]


def _num(x) -> str:
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def write_report(rows: Sequence[TrialReport], path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in rows:
            w.writerow([r.method, _num(r.budget), r.start, r.repeat, r.n_obs, _num(r.fisher),
                        _num(r.recon_mse), int(r.excluded)])


def write_aggregates(aggs: Sequence[Aggregate], path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(AGGREGATE_HEADER)
        for a in aggs:
            w.writerow([a.method, _num(a.budget), _num(a.mean_fisher), _num(a.se_fisher),
                        _num(a.mean_mse), _num(a.se_mse), a.n_trials])
