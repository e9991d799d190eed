"""Command-line front end: ``fisherplan {synth,fit,plan,sample,complete,eval}``.

Every subcommand reads its parameters from built-in defaults, then an
optional ``--config`` file of ``key=value`` lines, then command-line flags.
``--dump-config`` prints the effective configuration in the same format.

Exit codes: 0 success, 1 usage error, 2 data or format error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .errors import DataError, FormatError, InvalidCellError, NumericalError
from .glrm import (FitConfig, ObservationSet, UnderdeterminedWarning, complete, fit, load_model,
                   objective, save_model)
from .grid import (load_region, load_snapshot, load_stack, stack_to_matrix,
                   store_region, store_snapshot, store_stack)
from .harness import (METHODS, SynthConfig, aggregate, choose_starts, complete_condition, error_heatmap,
                      make_plan, run_trials, simulate_observations, synth_generate,
                      write_aggregates, write_report, Dataset)
from .planner import PlannerConfig, read_plan, write_plan


EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


# ------------------------------------------------------------ parameter table

def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _floats(s: str) -> tuple[float, ...]:
    vals = tuple(float(t) for t in s.split(",") if t.strip())
    if not vals:
        raise ValueError("expected a comma-separated list of numbers")
    return vals


def _methods(s: str) -> tuple[str, ...]:
    vals = tuple(t.strip() for t in s.split(",") if t.strip())
    bad = [v for v in vals if v not in METHODS]
    if bad or not vals:
        raise ValueError(f"unknown method(s) {bad}; choose from {','.join(METHODS)}")
    return vals


def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(_fmt(x) for x in v)
    if v is None:
        return ""
    return str(v)


@dataclass(frozen=True)
class Param:
    name: str
    parse: Callable[[str], Any]
    default: Any
    help: str
    check: Callable[[Any], bool] = lambda v: True
    required: bool = False


def _pos(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _path(s: str) -> Path:
    return Path(s)


FIT_PARAMS = [
    Param("rank", int, 5, "model rank k", _pos),
    Param("max_iters", int, 200, "maximum ALS sweeps", _pos),
    Param("rel_tol", float, 1e-6, "stop when the relative objective decrease falls below this", _pos),
    Param("ridge", float, 1e-6, "ridge penalty on both factors", _nonneg),
    Param("fit_seed", int, 0, "seed for factor initialization"),
    Param("init", str, "svd", "initialization: svd or random", lambda v: v in ("svd", "random")),
]

PLANNER_PARAMS = [
    Param("jitter", float, 1e-9, "diagonal jitter inside the log-det", _pos),
    Param("info_tol", float, 1e-12, "stop when the best gain/cost ratio is at most this", _nonneg),
    Param("candidate_pool", int, 0, "random candidates per greedy step (0 = all cells)", _nonneg),
]

COMMANDS: dict[str, list[Param]] = {
    "synth": [
        Param("out", _path, None, "output directory", required=True),
        Param("create", _bool, False, "create the output directory if missing"),
        Param("rows", int, 30, "grid rows", _pos),
        Param("cols", int, 30, "grid columns", _pos),
        Param("rank", int, 5, "true rank of the field", _pos),
        Param("t_train", int, 24, "training snapshots", _pos),
        Param("t_test", int, 6, "test snapshots", _pos),
        Param("noise_sigma", float, 0.05, "Gaussian noise level", _nonneg),
        Param("missing_prob", float, 0.2, "probability an entry is dropped", lambda v: 0 <= v < 1),
        Param("smoothness", int, 4, "cosine basis fields per rank component", _pos),
        Param("seed", int, 0, "random seed"),
    ],
    "fit": [
        Param("stack", _path, None, "snapshot stack manifest", required=True),
        Param("region", _path, None, "region manifest", required=True),
        Param("out", _path, None, "model file to write", required=True),
        *FIT_PARAMS,
    ],
    "plan": [
        Param("model", _path, None, "model file", required=True),
        Param("region", _path, None, "region manifest", required=True),
        Param("start", int, None, "start cell index (row-major)", _nonneg, required=True),
        Param("budget", float, 50.0, "travel budget in cell widths", lambda v: v >= 0 and math.isfinite(v)),
        Param("method", str, "greedy", f"one of {','.join(METHODS)}", lambda v: v in METHODS),
        Param("seed", int, 0, "seed for random walks and candidate pools"),
        Param("out", _path, None, "plan CSV to write", required=True),
        *PLANNER_PARAMS,
    ],
    "sample": [
        Param("plan", _path, None, "plan CSV", required=True),
        Param("snapshot", _path, None, "snapshot CSV to sample from", required=True),
        Param("region", _path, None, "region manifest", required=True),
        Param("out", _path, None, "observation CSV to write", required=True),
    ],
    "complete": [
        Param("model", _path, None, "model file", required=True),
        Param("region", _path, None, "region manifest", required=True),
        Param("obs", _path, None, "observation CSV (cell_index,value)", required=True),
        Param("out", _path, None, "predicted snapshot CSV to write", required=True),
    ],
    "eval": [
        Param("data", _path, None, "dataset directory written by synth", required=True),
        Param("out", _path, None, "output directory for report CSVs", required=True),
        Param("model", _path, None, "model file (fitted on the train split when omitted)"),
        Param("budgets", _floats, (5.0, 50.0, 200.0), "comma-separated budgets",
              lambda v: all(b >= 0 and math.isfinite(b) for b in v)),
        Param("methods", _methods, METHODS, "comma-separated methods"),
        Param("n_starts", int, 10, "number of random start cells", _pos),
        Param("n_random", int, 70, "random-walk repeats per condition", _pos),
        Param("min_obs", int, 10, "trials with fewer observations are excluded", _nonneg),
        Param("seed", int, 0, "seed for starts and random walks"),
        Param("heatmaps", _bool, False, "write per-cell error heatmaps for greedy plans"),
        *FIT_PARAMS,
        *PLANNER_PARAMS,
    ],
}


def read_config(path: Path) -> dict[str, str]:
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read config {path}: {e}") from None
    for n, ln in enumerate(text.splitlines(), start=1):
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        key, sep, val = ln.partition("=")
        if not sep:
            raise UsageError(f"{path}: line {n}: expected key=value")
        out[key.strip()] = val.strip()
    return out


def resolve(params: list[Param], cfg_file: dict[str, str], flags: dict[str, str]) -> dict[str, Any]:
    """Merge defaults, config file and flags; parse and range-check every value."""
    known = {p.name for p in params}
    unknown = sorted(set(cfg_file) - known)
    if unknown:
        raise UsageError(f"unknown config key(s): {', '.join(unknown)}")
    out = {}
    for p in params:
        raw = flags.get(p.name, cfg_file.get(p.name))
        if raw is None or raw == "":
            if p.required:
                raise UsageError(f"missing required parameter --{p.name.replace('_', '-')}")
            out[p.name] = p.default
            continue
        try:
            v = p.parse(raw)
        except ValueError as e:
            raise UsageError(f"{p.name}: {e}") from None
        if not p.check(v):
            raise UsageError(f"{p.name}: value {raw!r} out of range")
        out[p.name] = v
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fisherplan", description="Low-rank field modelling and informative sampling plans.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, params in COMMANDS.items():
        sp = sub.add_parser(name, help=(globals()[f"cmd_{name}"].__doc__ or "").strip().splitlines()[0])
        sp.add_argument("--config", type=Path, help="key=value file; flags override it")
        sp.add_argument("--dump-config", action="store_true", help="print the effective config and exit")
        for p in params:
            d = "required" if p.required else f"default: {_fmt(p.default) or 'none'}"
            sp.add_argument(f"--{p.name.replace('_', '-')}", dest=p.name, default=argparse.SUPPRESS,
                            metavar=p.name.upper(), help=f"{p.help} ({d}); config key '{p.name}'")
    return parser


# ------------------------------------------------------------------- commands

def _fit_config(o) -> FitConfig:
    return FitConfig(rank=o["rank"], max_iters=o["max_iters"], rel_tol=o["rel_tol"], ridge=o["ridge"],
                     seed=o["fit_seed"], init=o["init"])


def _planner_config(o, budget=50.0, seed=0) -> PlannerConfig:
    return PlannerConfig(budget=budget, jitter=o["jitter"], info_tol=o["info_tol"],
                         candidate_pool=o["candidate_pool"] or None, seed=seed)


def cmd_synth(o) -> int:
    """Write a synthetic train/test/truth dataset."""
    out: Path = o["out"]
    if not out.is_dir():
        if not o["create"]:
            raise DataError(f"output directory {out} does not exist (pass --create true)")
        out.mkdir(parents=True)
    cfg = SynthConfig(rows=o["rows"], cols=o["cols"], rank=o["rank"], T_train=o["t_train"],
                      T_test=o["t_test"], noise_sigma=o["noise_sigma"], missing_prob=o["missing_prob"],
                      smoothness=o["smoothness"], seed=o["seed"])
    ds = synth_generate(cfg)
    store_region(ds.region, out / "region.txt")
    listed = {}
    for split, snaps in (("train", ds.train), ("test", ds.test), ("truth", ds.truth)):
        (out / split).mkdir(exist_ok=True)
        rel = [Path(split) / f"{t:04d}.csv" for t in range(len(snaps))]
        for r, s in zip(rel, snaps):
            store_snapshot(s, out / r)
        store_stack(rel, out / f"{split}.txt")
        listed[split] = rel
    store_stack(listed["train"] + listed["test"], out / "manifest.txt")
    print(f"wrote {len(ds.train)} train, {len(ds.test)} test snapshots over {cfg.rows}x{cfg.cols} to {out}")
    return EXIT_OK


def cmd_fit(o) -> int:
    """Fit a low rank model to a stack of snapshots."""
    region = load_region(o["region"])
    data = stack_to_matrix(load_stack(o["stack"], region))
    model = fit(data, _fit_config(o))
    save_model(model, o["out"])
    print(f"objective={objective(model, data)!r} iterations={len(model.trace)} k={model.k} T={model.T} L={model.L}")
    return EXIT_OK


def _check_model(model, region):
    if model.L != region.L:
        raise DataError(f"model has {model.L} cells but the region has {region.L} valid cells")


def cmd_plan(o) -> int:
    """Plan sampling cells with the greedy planner or a baseline."""
    region = load_region(o["region"])
    model = load_model(o["model"])
    _check_model(model, region)
    cfg = _planner_config(o, o["budget"], o["seed"])
    sp = make_plan(o["method"], model, region, o["start"], o["budget"], o["seed"], cfg)
    sp = sp.with_fisher(model.Y, region, cfg.jitter)
    write_plan(sp, region, o["out"])
    if sp.over_budget:
        print(f"warning: seed set alone costs {sp.cost:.6g}, above budget {sp.budget:.6g}", file=sys.stderr)
    print(f"cells={len(sp.cells)} cost={sp.cost!r} fisher={sp.fisher!r}")
    return EXIT_OK


def write_observations(obs: ObservationSet, path) -> None:
    with open(path, "w") as f:
        f.write("cell_index,value\n")
        for c, v in zip(obs.cells, obs.values):
            f.write(f"{int(c)},{float(v)!r}\n")


def read_observations(path) -> ObservationSet:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != "cell_index,value":
        raise FormatError(f"{path}: line 1: expected header 'cell_index,value'")
    cells, vals = [], []
    for n, ln in enumerate(lines[1:], start=2):
        if not ln.strip():
            continue
        parts = ln.split(",")
        try:
            if len(parts) != 2:
                raise ValueError
            c, v = int(parts[0]), float(parts[1])
            if not math.isfinite(v):
                raise ValueError
        except ValueError:
            raise FormatError(f"{path}: line {n}: expected 'cell_index,value', got {ln!r}") from None
        cells.append(c)
        vals.append(v)
    if not cells:
        raise DataError(f"{path}: no observations")
    if len(set(cells)) != len(cells):
        raise FormatError(f"{path}: duplicate cell index")
    return ObservationSet(cells, vals)


def cmd_sample(o) -> int:
    """Take the observations a plan would collect from one snapshot."""
    region = load_region(o["region"])
    sp = read_plan(o["plan"], region)
    obs = simulate_observations(load_snapshot(o["snapshot"], region), sp)
    write_observations(obs, o["out"])
    print(f"observations={len(obs)} of {len(sp.cells)} plan cells")
    return EXIT_OK


def cmd_complete(o) -> int:
    """Predict a full snapshot from sparse observations."""
    region = load_region(o["region"])
    model = load_model(o["model"])
    _check_model(model, region)
    obs = read_observations(o["obs"])
    for c in obs.cells:
        if not region.is_valid(int(c)):
            raise InvalidCellError(f"observed cell {int(c)} is not part of the region")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", UnderdeterminedWarning)
        pred = complete(model, obs, region)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    store_snapshot(pred, o["out"])
    print(f"predicted {region.L} cells from {len(obs)} observations")
    return EXIT_OK


def load_dataset(root: Path) -> Dataset:
    region = load_region(root / "region.txt")
    truth = load_stack(root / "truth.txt", region) if (root / "truth.txt").exists() else []
    return Dataset(region, load_stack(root / "train.txt", region), load_stack(root / "test.txt", region), truth)


def cmd_eval(o) -> int:
    """Run the multi-trial comparison of the planner against the baselines."""
    ds = load_dataset(o["data"])
    if o["model"] is not None:
        model = load_model(o["model"])
        _check_model(model, ds.region)
    else:
        model = fit(stack_to_matrix(ds.train), _fit_config(o))
    out: Path = o["out"]
    out.mkdir(parents=True, exist_ok=True)
    starts = choose_starts(ds.region, o["n_starts"], o["seed"])
    cfg = _planner_config(o, seed=o["seed"])
    rows = run_trials(ds, model, o["methods"], o["budgets"], starts, o["min_obs"], o["seed"],
                      o["n_random"], cfg)
    aggs = aggregate(rows, o["methods"], o["budgets"])
    write_report(rows, out / "report.csv")
    write_aggregates(aggs, out / "aggregate.csv")
    if o["heatmaps"] and "greedy" in o["methods"]:
        ref = ds.truth or ds.test
        (out / "heatmaps").mkdir(exist_ok=True)
        for b in o["budgets"]:
            sp = make_plan("greedy", model, ds.region, starts[0], b, planner=cfg)
            obs = simulate_observations(ref[0], sp)
            if len(obs):
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", UnderdeterminedWarning)
                    pred = complete(model, obs, ds.region)
                store_snapshot(error_heatmap(pred, ref[0]), out / "heatmaps" / f"greedy_b{b:g}.csv")
    excluded = sum(r.excluded for r in rows)
    print(f"trials={len(rows)} excluded={excluded} complete_mse={complete_condition(ds, model)!r}")
    for a in aggs:
        print(f"{a.method:>15} b={a.budget:<6g} fisher={a.mean_fisher:.4g}±{a.se_fisher:.2g} "
              f"mse={a.mean_mse:.4g}±{a.se_mse:.2g} n={a.n_trials}")
    return EXIT_OK


# ----------------------------------------------------------------------- main

def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    params = COMMANDS[args.command]
    names = {p.name for p in params}
    flags = {k: v for k, v in vars(args).items() if k in names}
    try:
        cfg_file = read_config(args.config) if args.config else {}
        opts = resolve(params, cfg_file, flags)
    except UsageError as e:
        print(f"fisherplan {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if args.dump_config:
        for p in params:
            print(f"{p.name}={_fmt(opts[p.name])}")
        return EXIT_OK
    try:
        return globals()[f"cmd_{args.command}"](opts)
    except (FormatError, DataError, InvalidCellError, OSError) as e:
        print(f"fisherplan {args.command}: error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as e:
        print(f"fisherplan {args.command}: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
