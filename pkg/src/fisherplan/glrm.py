"""Quadratic-loss generalized low rank model and latent-factor region completion.

The data matrix ``D`` (``T x L``, times by cells) is approximated by
``X.T @ Y`` with ``X`` of shape ``(k, T)`` and ``Y`` of shape ``(k, L)``,
fitted by alternating masked least squares.
"""
from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError, NumericalError
from .grid import DataMatrix, Region, Snapshot

MAGIC = b"GLRM1"
_HEADER = struct.Struct("<QQQ")


class UnderdeterminedWarning(UserWarning):
    """Fewer observations than model rank; the completion is a minimum-norm guess."""


@dataclass(frozen=True)
class FitConfig:
    rank: int = 5
    max_iters: int = 200
    rel_tol: float = 1e-6
    ridge: float = 1e-6
    seed: int = 0
    init: str = "svd"

    def __post_init__(self):
        if self.init not in ("svd", "random"):
            raise DataError(f"unknown init {self.init!r}")
        if self.rank < 1:
            raise DataError("rank must be positive")
        if self.max_iters < 1:
            raise DataError("max_iters must be positive")
        if not self.rel_tol > 0:
            raise DataError("rel_tol must be positive")
        if self.ridge < 0:
            raise DataError("ridge must be nonnegative")


@dataclass(frozen=True, eq=False)
class LowRankModel:
    """Temporal factor ``X`` (k x T) and spatial factor ``Y`` (k x L).

    ``trace`` holds the regularized objective after every ALS sweep when the
    model came out of :func:`fit`; it is not part of equality or the file format.
    """

    X: np.ndarray
    Y: np.ndarray
    trace: tuple = field(default=(), repr=False)

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64)
        Y = np.array(self.Y, dtype=np.float64)
        if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
            raise DataError(f"factor shapes {X.shape} and {Y.shape} disagree on rank")
        if not (np.isfinite(X).all() and np.isfinite(Y).all()):
            raise NumericalError("model factors must be finite")
        X.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def k(self) -> int:
        return self.X.shape[0]

    @property
    def T(self) -> int:
        return self.X.shape[1]

    @property
    def L(self) -> int:
        return self.Y.shape[1]

    def reconstruct(self) -> np.ndarray:
        return self.X.T @ self.Y

    def __eq__(self, other):
        if not isinstance(other, LowRankModel):
            return NotImplemented
        return (self.X.shape == other.X.shape and self.Y.shape == other.Y.shape
                and self.X.tobytes() == other.X.tobytes() and self.Y.tobytes() == other.Y.tobytes())

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """Sparse map from cell index to observed value, kept sorted by cell."""

    cells: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.cells, dtype=np.int64).reshape(-1)
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if c.size != v.size:
            raise DataError("cells and values differ in length")
        if not np.isfinite(v).all():
            raise DataError("observed values must be finite")
        order = np.argsort(c, kind="stable")
        c, v = c[order], v[order]
        if c.size > 1 and (np.diff(c) == 0).any():
            raise DataError("duplicate cell in observation set")
        c.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "cells", c)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_dict(cls, entries: dict) -> "ObservationSet":
        return cls(list(entries.keys()), list(entries.values()))

    def as_dict(self) -> dict[int, float]:
        return {int(c): float(v) for c, v in zip(self.cells, self.values)}

    def __len__(self):
        return int(self.cells.size)

    def __eq__(self, other):
        if not isinstance(other, ObservationSet):
            return NotImplemented
        return np.array_equal(self.cells, other.cells) and np.array_equal(self.values, other.values)

    __hash__ = None


# ------------------------------------------------------------------------ fit

def objective(model: LowRankModel, data: DataMatrix) -> float:
    """Squared residual summed over observed entries only."""
    if model.X.shape[1] != data.T or model.Y.shape[1] != data.L:
        raise DataError(f"model is {model.T}x{model.L}, data is {data.T}x{data.L}")
    r = np.where(data.mask, model.reconstruct() - data.values, 0.0)
    return float(np.sum(r * r))


def _solve_blocks(G: np.ndarray, b: np.ndarray, ridge: float) -> np.ndarray:
    """Solve the stacked k x k normal equations ``G[i] z = b[i]``."""
    if ridge > 0:
        G = G + ridge * np.eye(G.shape[-1])
        try:
            return np.linalg.solve(G, b[..., None])[..., 0]
        except np.linalg.LinAlgError:
            pass
    # Minimum-norm least squares when a block is singular.
    return (np.linalg.pinv(G, hermitian=True) @ b[..., None])[..., 0]


def _check_coverage(data: DataMatrix) -> None:
    empty_rows = np.flatnonzero(~data.mask.any(axis=1))
    if empty_rows.size:
        raise DataError(f"time {int(empty_rows[0])} has no observed entries")
    empty_cols = np.flatnonzero(~data.mask.any(axis=0))
    if empty_cols.size:
        j = int(empty_cols[0])
        where = f"column {j}"
        if data.region is not None:
            cell = data.region.expand(j)
            where += f" (cell {cell} at row {cell // data.region.cols}, col {cell % data.region.cols})"
        raise DataError(f"{where} has no observed entries")


def _initial_factors(D, M, k, cfg):
    rng = np.random.default_rng(cfg.seed)
    X = rng.standard_normal((k, D.shape[0])) / np.sqrt(k)
    Y = rng.standard_normal((k, D.shape[1])) / np.sqrt(k)
    if cfg.init == "random":
        return X, Y
    # Truncated SVD of the rescaled zero-filled matrix, nudged by the seeded noise.
    U, s, Vt = np.linalg.svd(D / M.mean(), full_matrices=False)
    root = np.sqrt(s[:k])
    scale = 1e-3 * np.sqrt(s[0] / k) if s[0] > 0 else 1.0
    return (U[:, :k] * root).T + scale * X, (Vt[:k].T * root).T + scale * Y


def fit(data: DataMatrix, cfg: FitConfig = FitConfig()) -> LowRankModel:
    """Fit ``X``, ``Y`` to the observed entries of ``data`` by alternating least squares.

    Each sweep solves, for every time ``t``, a ridge least-squares problem for
    ``X[:, t]`` over that row's observed cells, then symmetrically for every
    column of ``Y``. Iteration stops once the relative decrease of the
    (ridge-regularized) objective drops below ``cfg.rel_tol``.
    """
    T, L = data.T, data.L
    k = cfg.rank
    if k > min(T, L):
        raise DataError(f"rank {k} exceeds min(T, L) = {min(T, L)}")
    _check_coverage(data)

    M = data.mask.astype(float)
    D = data.values * M
    X, Y = _initial_factors(D, M, k, cfg)

    def total(X, Y):
        r = M * (X.T @ Y - D)
        return float(np.sum(r * r) + cfg.ridge * (np.sum(X * X) + np.sum(Y * Y)))

    trace = []
    prev = np.inf
    for _ in range(cfg.max_iters):
        G = np.einsum("tl,il,jl->tij", M, Y, Y, optimize=True)
        X = _solve_blocks(G, D @ Y.T, cfg.ridge).T
        G = np.einsum("tl,it,jt->lij", M, X, X, optimize=True)
        Y = _solve_blocks(G, D.T @ X.T, cfg.ridge).T
        cur = total(X, Y)
        if not np.isfinite(cur):
            raise NumericalError("ALS diverged to a non-finite objective")
        trace.append(cur)
        if cur == 0.0 or (prev - cur) < cfg.rel_tol * prev:
            break
        prev = cur
    return LowRankModel(X, Y, tuple(trace))


# ----------------------------------------------------------------- completion

def _observed_columns(Y: np.ndarray, obs: ObservationSet, region: Region | None) -> np.ndarray:
    if region is not None:
        if region.L != Y.shape[1]:
            raise DataError(f"region has {region.L} valid cells, model has {Y.shape[1]} columns")
        return np.asarray(region.compact(obs.cells))
    cols = obs.cells
    if cols.size and (cols.min() < 0 or cols.max() >= Y.shape[1]):
        raise DataError(f"observed cell outside 0..{Y.shape[1] - 1}")
    return cols


def estimate_latent(Y: np.ndarray, obs: ObservationSet, region: Region | None = None) -> np.ndarray:
    """Minimum-norm least-squares latent vector ``x`` with ``Y_S.T @ x ~= d_S``.

    Without ``region`` the observation keys are taken as column indices of
    ``Y``; with it they are grid cell indices of ``region``.
    """
    if len(obs) == 0:
        raise DataError("cannot estimate a latent vector from zero observations")
    Y = np.asarray(Y, dtype=float)
    cols = _observed_columns(Y, obs, region)
    x, *_ = np.linalg.lstsq(Y[:, cols].T, obs.values, rcond=None)
    return x


def complete(model: LowRankModel, obs: ObservationSet, region: Region | None = None) -> Snapshot:
    """Predict every cell as ``Y.T @ x`` from the latent estimate of ``obs``."""
    if 0 < len(obs) < model.k:
        warnings.warn(
            f"{len(obs)} observations for a rank-{model.k} model; prediction is underdetermined",
            UnderdeterminedWarning, stacklevel=2)
    x = estimate_latent(model.Y, obs, region)
    return Snapshot(region or Region(1, model.L), model.Y.T @ x)


# ---------------------------------------------------------------------- files

def save_model(model: LowRankModel, path) -> None:
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(_HEADER.pack(model.k, model.T, model.L))
        f.write(np.ascontiguousarray(model.X, dtype="<f8").tobytes())
        f.write(np.ascontiguousarray(model.Y, dtype="<f8").tobytes())


def load_model(path) -> LowRankModel:
    buf = Path(path).read_bytes()
    if buf[:len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: not a model file (bad magic)")
    off = len(MAGIC)
    if len(buf) < off + _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    k, T, L = _HEADER.unpack_from(buf, off)
    off += _HEADER.size
    need = 8 * k * (T + L)
    if len(buf) - off != need:
        raise FormatError(f"{path}: expected {need} payload bytes, found {len(buf) - off}")
    X = np.frombuffer(buf, dtype="<f8", count=k * T, offset=off).reshape(k, T)
    Y = np.frombuffer(buf, dtype="<f8", count=k * L, offset=off + 8 * k * T).reshape(k, L)
    return LowRankModel(X.astype(np.float64), Y.astype(np.float64))
