"""Experiment runner: config handling, presets, grid sweeps, and the CLI.

A sweep executes every (algorithm, seed, grid point) cell, writes one trace
CSV per cell plus a ``summary.json`` holding the per-cell final metrics,
the best grid point per algorithm and seed, and one line per lemma check.
Everything is deterministic given the config: rerunning a sweep reproduces
the CSV files byte for byte.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import metrics, theory
from .distributed import (WorkerNode, dist_majority_vote_run, dist_signrvm_run,
                          dist_signrvr_run, make_rosenbrock_workers)
from .optimizers import (BaselineState, SignRRState, SignRVMState, SignRVRState,
                         baseline_epoch, signrr_epoch, signrvm_epoch, signrvr_epoch)
from .problems import (LogisticProblem, estimate_coordinate_smoothness,
                       load_logistic_csv, make_rosenbrock)
from .schedules import Constant, InverseSqrt


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the bad keys."""


DEFAULT_LR_GRID = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7)
DEFAULT_BETA_GRID = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)

CENTRAL_ALGOS = ("sgd", "rr", "signsgd", "signum", "adam",
                 "signrr", "signrvr", "signrvm")
DIST_ALGOS = ("signsgd_mv", "signum_mv", "dist_signrvr", "dist_signrvm")


@dataclass(frozen=True)
class AlgorithmSpec:
    """Static facts the runner needs about one method.

    ``momentum`` marks methods tuned over the beta grid; ``vr_check`` and
    ``descent_check`` mark which lemma monitors apply to its trajectories.
    The descent bound needs a ternary update direction, so it covers only
    the centralized sign methods; distributed runs step along fractional
    averages or pre-averaged votes.
    """

    name: str
    distributed: bool
    momentum: bool
    vr_check: bool
    descent_check: bool


ALGORITHMS = {spec.name: spec for spec in (
    AlgorithmSpec("sgd", False, False, False, False),
    AlgorithmSpec("rr", False, False, False, False),
    AlgorithmSpec("signsgd", False, False, False, True),
    AlgorithmSpec("signum", False, True, False, True),
    AlgorithmSpec("adam", False, True, False, False),
    AlgorithmSpec("signrr", False, False, False, True),
    AlgorithmSpec("signrvr", False, False, True, True),
    AlgorithmSpec("signrvm", False, True, True, True),
    AlgorithmSpec("dist_signrvr", True, False, True, False),
    AlgorithmSpec("dist_signrvm", True, True, True, False),
    AlgorithmSpec("signsgd_mv", True, False, False, False),
    AlgorithmSpec("signum_mv", True, True, False, False),
)}

# Momentum variants use the epoch-shifted adaptive schedules.
EPOCH_SHIFT_ALGOS = frozenset({"signrvm", "dist_signrvm"})

SCHEDULE_KINDS = ("constant", "inverse_sqrt")
SHIFT_MODES = ("auto", "none", "epoch")
SUMMARY_METRICS = ("grad_l1", "f")


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "rosenbrock"
    n: int = 1000
    d: int = 5
    u_max: float = 10.0
    csv_path: str | None = None
    csv_has_header: bool = False
    algorithms: tuple = CENTRAL_ALGOS
    epochs: int = 150
    gamma_kind: str = "constant"
    dthr_kind: str = "constant"
    shift: str = "auto"
    lr_grid: tuple = DEFAULT_LR_GRID
    beta_grid: tuple = DEFAULT_BETA_GRID
    d0: float = 0.1
    batch_size: int = 1
    seeds: tuple = (1, 2, 3, 4, 5)
    workers: int = 1
    aggregation: str = "sign_average"
    bytes_per_sign: int = 1
    bytes_per_float: int = 64
    telemetry_stride: int = 1
    smoothing_window: int = 10
    summary_metric: str = "grad_l1"
    smooth_after_log: bool = True
    x0: float | tuple = 0.0
    problem_seed: int | None = None
    lemma_checks: bool = True
    smoothness_samples: int = 200
    jobs: int = 1
    out_dir: str = "runs"


# Field kinds drive CLI flag parsing and config-file coercion.
_FIELD_KINDS = {
    "problem": "str", "n": "int", "d": "int", "u_max": "float",
    "csv_path": "optstr", "csv_has_header": "bool",
    "algorithms": "strs", "epochs": "int",
    "gamma_kind": "str", "dthr_kind": "str", "shift": "str",
    "lr_grid": "floats", "beta_grid": "floats", "d0": "float",
    "batch_size": "int", "seeds": "ints", "workers": "int",
    "aggregation": "str", "bytes_per_sign": "int", "bytes_per_float": "int",
    "telemetry_stride": "int", "smoothing_window": "int",
    "summary_metric": "str", "smooth_after_log": "bool",
    "x0": "x0", "problem_seed": "optint",
    "lemma_checks": "bool", "smoothness_samples": "int",
    "jobs": "int", "out_dir": "str",
}

PRESET_NAMES = ("rosenbrock_central", "rosenbrock_dist",
                "logistic_central", "logistic_dist")


def preset(name: str) -> ExperimentConfig:
    """The full-scale preset configurations; shrink with apply_scale for desk runs."""
    if name == "rosenbrock_central":
        return ExperimentConfig(gamma_kind="inverse_sqrt", shift="none", d0=2.0,
                                out_dir="runs/rosenbrock_central")
    if name == "rosenbrock_dist":
        return ExperimentConfig(algorithms=DIST_ALGOS, workers=10,
                                gamma_kind="inverse_sqrt", shift="none", d0=2.0,
                                smoothing_window=7, summary_metric="f",
                                out_dir="runs/rosenbrock_dist")
    if name == "logistic_central":
        return ExperimentConfig(problem="logistic",
                                out_dir="runs/logistic_central")
    if name == "logistic_dist":
        return ExperimentConfig(problem="logistic", algorithms=DIST_ALGOS,
                                workers=10, smoothing_window=7, summary_metric="f",
                                out_dir="runs/logistic_dist")
    raise ConfigError(f"unknown preset {name!r}; known: {', '.join(PRESET_NAMES)}")


def apply_scale(config: ExperimentConfig, scale: float) -> ExperimentConfig:
    """Shrink n and epochs together, keeping grids and everything else."""
    if not (math.isfinite(scale) and scale > 0):
        raise ConfigError(f"scale must be positive and finite, got {scale}")
    return dataclasses.replace(config,
                               n=max(1, round(config.n * scale)),
                               epochs=max(1, round(config.epochs * scale)))


def validate_config(config: ExperimentConfig) -> None:
    errors = []
    if config.problem not in ("rosenbrock", "logistic"):
        errors.append(f"problem: unknown problem {config.problem!r}")
    if config.problem == "rosenbrock":
        if config.n < 1:
            errors.append(f"n: must be at least 1, got {config.n}")
        if config.d < 2:
            errors.append(f"d: must be at least 2, got {config.d}")
        if not (math.isfinite(config.u_max) and config.u_max > 0):
            errors.append(f"u_max: must be positive and finite, got {config.u_max}")
    else:
        if not config.csv_path:
            errors.append("csv_path: required for the logistic problem")
        elif not Path(config.csv_path).is_file():
            errors.append(f"csv_path: no file at {config.csv_path}")
    if not config.algorithms:
        errors.append("algorithms: empty list")
    unknown = [a for a in config.algorithms if a not in ALGORITHMS]
    if unknown:
        errors.append(f"algorithms: unknown {', '.join(unknown)}")
    if len(set(config.algorithms)) != len(config.algorithms):
        errors.append("algorithms: duplicates")
    if config.epochs < 1:
        errors.append(f"epochs: must be at least 1, got {config.epochs}")
    if config.gamma_kind not in SCHEDULE_KINDS:
        errors.append(f"gamma_kind: unknown {config.gamma_kind!r}")
    if config.dthr_kind not in SCHEDULE_KINDS:
        errors.append(f"dthr_kind: unknown {config.dthr_kind!r}")
    if config.shift not in SHIFT_MODES:
        errors.append(f"shift: unknown {config.shift!r}")
    if not config.lr_grid:
        errors.append("lr_grid: empty")
    elif any(not (math.isfinite(v) and v > 0) for v in config.lr_grid):
        errors.append("lr_grid: entries must be positive and finite")
    needs_beta = any(a in ALGORITHMS and ALGORITHMS[a].momentum
                     for a in config.algorithms)
    if needs_beta and not config.beta_grid:
        errors.append("beta_grid: empty but a momentum method is selected")
    if any(not 0 < b < 1 for b in config.beta_grid):
        errors.append("beta_grid: entries must lie in (0, 1)")
    if not (math.isfinite(config.d0) and config.d0 > 0):
        errors.append(f"d0: must be positive and finite, got {config.d0}")
    if config.batch_size < 1:
        errors.append(f"batch_size: must be at least 1, got {config.batch_size}")
    if not config.seeds:
        errors.append("seeds: empty")
    elif len(set(config.seeds)) != len(config.seeds):
        errors.append("seeds: must be distinct")
    elif any(s < 0 for s in config.seeds):
        errors.append("seeds: must be non-negative")
    if config.workers < 1:
        errors.append(f"workers: must be at least 1, got {config.workers}")
    if config.aggregation not in ("sign_average", "majority_vote"):
        errors.append(f"aggregation: unknown {config.aggregation!r}")
    if config.bytes_per_sign < 1:
        errors.append(f"bytes_per_sign: must be at least 1, got {config.bytes_per_sign}")
    if config.bytes_per_float < 1:
        errors.append(f"bytes_per_float: must be at least 1, got {config.bytes_per_float}")
    if config.telemetry_stride < 1:
        errors.append(f"telemetry_stride: must be at least 1, got {config.telemetry_stride}")
    if config.smoothing_window < 1:
        errors.append(f"smoothing_window: must be at least 1, got {config.smoothing_window}")
    if config.summary_metric not in SUMMARY_METRICS:
        errors.append(f"summary_metric: unknown {config.summary_metric!r}")
    if isinstance(config.x0, tuple):
        if config.problem == "rosenbrock" and len(config.x0) != config.d:
            errors.append(f"x0: length {len(config.x0)} does not match d={config.d}")
        if any(not math.isfinite(v) for v in config.x0):
            errors.append("x0: entries must be finite")
    elif not math.isfinite(config.x0):
        errors.append(f"x0: must be finite, got {config.x0}")
    if config.problem_seed is not None and config.problem_seed < 0:
        errors.append(f"problem_seed: must be non-negative, got {config.problem_seed}")
    if config.smoothness_samples < 1:
        errors.append(f"smoothness_samples: must be at least 1, got {config.smoothness_samples}")
    if config.jobs < 1:
        errors.append(f"jobs: must be at least 1, got {config.jobs}")
    if errors:
        raise ConfigError("; ".join(errors))


def _coerce(name: str, value):
    kind = _FIELD_KINDS[name]
    if kind in ("floats", "ints", "strs") and isinstance(value, list):
        return tuple(value)
    if kind == "x0" and isinstance(value, list):
        return tuple(float(v) for v in value)
    return value


def config_from_dict(data: dict) -> ExperimentConfig:
    unknown = [k for k in data if k not in _FIELD_KINDS]
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return dataclasses.replace(ExperimentConfig(),
                               **{k: _coerce(k, v) for k, v in data.items()})


def load_config_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a flat object")
    return data


def build_config(preset_name=None, file_path=None, overrides=None,
                 scale=None) -> ExperimentConfig:
    """Defaults, then preset, then config file, then flag overrides, then scale."""
    config = preset(preset_name) if preset_name else ExperimentConfig()
    merged = {}
    if file_path:
        merged.update(load_config_file(file_path))
    if overrides:
        merged.update(overrides)
    if merged:
        unknown = [k for k in merged if k not in _FIELD_KINDS]
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        config = dataclasses.replace(config,
                                     **{k: _coerce(k, v) for k, v in merged.items()})
    if scale is not None:
        config = apply_scale(config, scale)
    validate_config(config)
    return config


@dataclass(frozen=True)
class Cell:
    algo: str
    seed: int
    lr: float
    beta: float | None


def grid_cells(config: ExperimentConfig):
    cells = []
    for algo in config.algorithms:
        betas = config.beta_grid if ALGORITHMS[algo].momentum else (None,)
        for seed in config.seeds:
            for lr in config.lr_grid:
                for beta in betas:
                    cells.append(Cell(algo, seed, lr, beta))
    return cells


def cell_grid_id(cell: Cell) -> str:
    gid = f"lr{cell.lr:.0e}"
    if cell.beta is not None:
        gid += f"_b{cell.beta:g}"
    return gid


def cell_filename(cell: Cell) -> str:
    return f"{cell.algo}_{cell.seed}_{cell_grid_id(cell)}.csv"


def _epoch_shift(config: ExperimentConfig, algo: str) -> bool:
    if config.shift == "epoch":
        return True
    if config.shift == "none":
        return False
    return algo in EPOCH_SHIFT_ALGOS


def _schedule(kind: str, scale_value: float, shifted: bool):
    if kind == "constant":
        return Constant(scale_value)
    return InverseSqrt(scale_value, epoch_shift=shifted)


def _problem_seed(config: ExperimentConfig, seed: int) -> int:
    return seed if config.problem_seed is None else config.problem_seed


_LOGISTIC_CACHE = {}


def _load_logistic(config: ExperimentConfig) -> LogisticProblem:
    key = (config.csv_path, config.csv_has_header)
    if key not in _LOGISTIC_CACHE:
        _LOGISTIC_CACHE[key] = load_logistic_csv(config.csv_path,
                                                 has_header=config.csv_has_header)
    return _LOGISTIC_CACHE[key]


def _build_problem(config: ExperimentConfig, seed: int):
    if config.problem == "rosenbrock":
        return make_rosenbrock(config.n, config.d, config.u_max,
                               _problem_seed(config, seed))
    return _load_logistic(config)


def _build_workers(config: ExperimentConfig, seed: int):
    if config.problem == "rosenbrock":
        return make_rosenbrock_workers(config.workers, config.n, config.d,
                                       config.u_max, _problem_seed(config, seed))
    base = _load_logistic(config)
    n0 = base.n // config.workers
    if n0 < 1:
        raise ConfigError(f"workers: {config.workers} workers need at least "
                          f"{config.workers} samples, have {base.n}")
    return [WorkerNode(worker_id=m,
                       problem=LogisticProblem(base.features[m * n0:(m + 1) * n0],
                                               base.labels[m * n0:(m + 1) * n0],
                                               num_classes=base.num_classes))
            for m in range(config.workers)]


def _x0_vector(config: ExperimentConfig, d: int) -> np.ndarray:
    if isinstance(config.x0, tuple):
        arr = np.asarray(config.x0, dtype=float)
        if arr.shape != (d,):
            raise ConfigError(f"x0: length {arr.size} does not match dimension {d}")
        return arr
    return np.full(d, float(config.x0))


def _run_central_cell(config: ExperimentConfig, cell: Cell, problem, detail=None):
    shifted = _epoch_shift(config, cell.algo)
    gamma = _schedule(config.gamma_kind, cell.lr, shifted)
    dthr = _schedule(config.dthr_kind, config.d0, shifted)
    x0 = _x0_vector(config, problem.d)
    kw = dict(batch_size=config.batch_size,
              telemetry_stride=config.telemetry_stride, detail=detail)
    records = []
    if cell.algo == "signrr":
        state = SignRRState(x0, cell.seed)
        for _ in range(config.epochs):
            _, recs = signrr_epoch(state, problem, gamma, **kw)
            records.extend(recs)
    elif cell.algo == "signrvr":
        state = SignRVRState(x0, cell.seed)
        for _ in range(config.epochs):
            _, recs = signrvr_epoch(state, problem, gamma, dthr, **kw)
            records.extend(recs)
    elif cell.algo == "signrvm":
        state = SignRVMState(x0, cell.seed, beta=cell.beta)
        for _ in range(config.epochs):
            _, recs = signrvm_epoch(state, problem, gamma, dthr, **kw)
            records.extend(recs)
    else:
        state = BaselineState(x0, cell.seed)
        beta = 0.9 if cell.beta is None else cell.beta
        for _ in range(config.epochs):
            _, recs = baseline_epoch(cell.algo, state, problem, gamma=gamma,
                                     beta=beta, **kw)
            records.extend(recs)
    return records, None


def _run_dist_cell(config: ExperimentConfig, cell: Cell, workers, detail=None):
    shifted = _epoch_shift(config, cell.algo)
    gamma = _schedule(config.gamma_kind, cell.lr, shifted)
    dthr = _schedule(config.dthr_kind, config.d0, shifted)
    x0 = _x0_vector(config, workers[0].problem.d)
    common = dict(master_seed=cell.seed, x0=x0,
                  bytes_per_sign=config.bytes_per_sign,
                  bytes_per_float=config.bytes_per_float,
                  batch_size=config.batch_size,
                  telemetry_stride=config.telemetry_stride, detail=detail)
    if cell.algo == "dist_signrvr":
        _, records, ledger = dist_signrvr_run(workers, config.epochs, gamma, dthr,
                                              aggregation=config.aggregation, **common)
    elif cell.algo == "dist_signrvm":
        _, records, ledger = dist_signrvm_run(workers, config.epochs, gamma, dthr,
                                              beta=cell.beta,
                                              aggregation=config.aggregation, **common)
    else:
        beta = 0.9 if cell.beta is None else cell.beta
        _, records, ledger = dist_majority_vote_run(cell.algo, workers, config.epochs,
                                                    gamma, beta=beta, **common)
    return records, ledger


def _final_metric(config: ExperimentConfig, records) -> float:
    if not records:
        raise ValueError("empty trace")
    attr = config.summary_metric
    series = [getattr(r, attr) for r in records]
    processed = metrics.process_series(series, config.smoothing_window, "log10",
                                       smooth_after_transform=config.smooth_after_log)
    final = float(processed.smoothed[-1])
    if not math.isfinite(final):
        raise ValueError("non-finite summary metric")
    return final


def run_cell(config: ExperimentConfig, cell: Cell) -> dict:
    """Execute one cell, write its trace CSV, and summarize it.

    Divergence (overflow to NaN, metric leaving the positive range) is not
    an error: the cell reports an infinite final metric so grid selection
    skips past it, and whatever trace prefix exists is still written.
    """
    row = {"algo": cell.algo, "seed": cell.seed, "lr": cell.lr, "beta": cell.beta,
           "csv": cell_filename(cell), "final": math.inf, "diverged": False,
           "error": "", "bytes_up": 0, "bytes_down": 0}
    records = []
    ledger = None
    try:
        with np.errstate(over="ignore", invalid="ignore", under="ignore",
                         divide="ignore"):
            if ALGORITHMS[cell.algo].distributed:
                workers = _build_workers(config, cell.seed)
                records, ledger = _run_dist_cell(config, cell, workers)
            else:
                problem = _build_problem(config, cell.seed)
                records, ledger = _run_central_cell(config, cell, problem)
    except (FloatingPointError, OverflowError) as exc:
        row["diverged"] = True
        row["error"] = f"diverged: {exc}"
    metrics.emit_csv(records, Path(config.out_dir) / row["csv"])
    if ledger is not None:
        row["bytes_up"] = ledger.bytes_up
        row["bytes_down"] = ledger.bytes_down
    if row["diverged"]:
        return row
    try:
        row["final"] = _final_metric(config, records)
    except ValueError as exc:
        row["diverged"] = True
        row["error"] = f"metric failed: {exc}"
        row["final"] = math.inf
    return row


def _pool_cell(payload):
    config, cell = payload
    return run_cell(config, cell)


def _sort_key(row):
    beta = -1.0 if row["beta"] is None else row["beta"]
    return (row["final"], row["lr"], beta)


def select_best(rows) -> dict:
    """Per (algorithm, seed): the minimal final metric, ties to smaller lr."""
    best = {}
    for row in rows:
        key = (row["algo"], row["seed"])
        cur = best.get(key)
        if cur is None or _sort_key(row) < _sort_key(cur):
            best[key] = row
    return best


def _reports_for_detail(config: ExperimentConfig, cell: Cell, detail, problems):
    spec = ALGORITHMS[cell.algo]
    if not detail or not (spec.vr_check or spec.descent_check):
        return []
    pad = max(step.gamma for step in detail)
    region = theory.iterate_box(detail, pad)
    smooth = None
    for idx, prob in enumerate(problems):
        est = estimate_coordinate_smoothness(prob, region,
                                             config.smoothness_samples, seed=idx)
        smooth = est if smooth is None else np.maximum(smooth, est)
    reports = []
    if spec.vr_check:
        reports.append(theory.check_vr_bound(detail, smooth))
    if spec.descent_check:
        reports.append(theory.check_descent(detail, smooth))
    return [dataclasses.replace(r, lemma_id=f"{cell.algo} {r.lemma_id}")
            for r in reports]


def _check_cell(config: ExperimentConfig, cell: Cell):
    detail = []
    with np.errstate(over="ignore", invalid="ignore", under="ignore",
                     divide="ignore"):
        if ALGORITHMS[cell.algo].distributed:
            workers = _build_workers(config, cell.seed)
            _run_dist_cell(config, cell, workers, detail=detail)
            problems = [w.problem for w in workers]
        else:
            problem = _build_problem(config, cell.seed)
            _run_central_cell(config, cell, problem, detail=detail)
            problems = [problem]
    return _reports_for_detail(config, cell, detail, problems)


def _lemma_section(config: ExperimentConfig, rows):
    """Lemma reports for the best non-diverged cell of each checkable method,
    plus the synthetic sign-probability suite."""
    per_algo = {}
    for row in rows:
        if row["diverged"]:
            continue
        cur = per_algo.get(row["algo"])
        if cur is None or _sort_key(row) < _sort_key(cur):
            per_algo[row["algo"]] = row
    reports = []
    for algo in config.algorithms:
        spec = ALGORITHMS[algo]
        if not (spec.vr_check or spec.descent_check):
            continue
        row = per_algo.get(algo)
        if row is None:
            continue
        cell = Cell(algo, row["seed"], row["lr"], row["beta"])
        reports.extend(_check_cell(config, cell))
    reports.extend(theory.markov_suite())
    return reports


def run_experiment(config: ExperimentConfig) -> dict:
    """Run the sweep, write per-cell CSVs and summary.json, return the summary."""
    validate_config(config)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cells = grid_cells(config)
    try:
        if config.jobs > 1:
            with ProcessPoolExecutor(max_workers=config.jobs) as pool:
                rows = list(pool.map(_pool_cell, [(config, c) for c in cells]))
        else:
            rows = [run_cell(config, c) for c in cells]
        lemma_reports = _lemma_section(config, rows) if config.lemma_checks else []
        best = select_best(rows)
        summary = {
            "config": dataclasses.asdict(config),
            "cells": rows,
            "best": {f"{algo}:{seed}": {k: row[k] for k in
                                        ("lr", "beta", "final", "csv")}
                     for (algo, seed), row in sorted(best.items())},
            "lemmas": [r.line() for r in lemma_reports],
            "lemma_violations": int(sum(r.violations for r in lemma_reports)),
        }
        with open(out_dir / "summary.json", "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return summary
    except Exception:
        for cell in cells:
            (out_dir / cell_filename(cell)).unlink(missing_ok=True)
        (out_dir / "summary.json").unlink(missing_ok=True)
        raise


def _csv_bytes(records) -> bytes:
    with tempfile.NamedTemporaryFile(suffix=".csv", delete=False) as fh:
        tmp = Path(fh.name)
    try:
        metrics.emit_csv(records, tmp)
        return tmp.read_bytes()
    finally:
        tmp.unlink(missing_ok=True)


def run_check(trace_path: str) -> int:
    """Rerun one stored trace deterministically and its theory checks."""
    path = Path(trace_path)
    if not path.is_file():
        print(f"config error: no trace file at {path}", file=sys.stderr)
        return 2
    summary_path = path.parent / "summary.json"
    if not summary_path.is_file():
        print(f"config error: no summary.json next to {path}", file=sys.stderr)
        return 2
    with open(summary_path, encoding="utf-8") as fh:
        summary = json.load(fh)
    try:
        config = config_from_dict(summary["config"])
        validate_config(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    row = next((r for r in summary["cells"] if r["csv"] == path.name), None)
    if row is None:
        print(f"config error: {path.name} not listed in {summary_path}",
              file=sys.stderr)
        return 2
    cell = Cell(row["algo"], int(row["seed"]), float(row["lr"]),
                None if row["beta"] is None else float(row["beta"]))
    detail = []
    records = []
    problems = []
    diverged = ""
    try:
        with np.errstate(over="ignore", invalid="ignore", under="ignore",
                         divide="ignore"):
            if ALGORITHMS[cell.algo].distributed:
                workers = _build_workers(config, cell.seed)
                records, _ = _run_dist_cell(config, cell, workers, detail=detail)
                problems = [w.problem for w in workers]
            else:
                problem = _build_problem(config, cell.seed)
                records, _ = _run_central_cell(config, cell, problem, detail=detail)
                problems = [problem]
    except (FloatingPointError, OverflowError) as exc:
        diverged = str(exc)
    if _csv_bytes(records) != path.read_bytes():
        print(f"check failed: rerun of {path.name} differs from the stored trace")
        return 3
    print(f"{path.name}: rerun matches stored trace byte for byte")
    if diverged:
        print(f"trajectory diverged ({diverged}); no lemma checks to run")
        return 0
    reports = _reports_for_detail(config, cell, detail, problems)
    if not reports:
        print("no trajectory lemma checks apply to this method")
        return 0
    for report in reports:
        print(report.line())
    return 3 if any(r.violations for r in reports) else 0


def _parse_flag(name: str, raw: str):
    kind = _FIELD_KINDS[name]
    try:
        if kind == "str":
            return raw
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == "floats":
            return tuple(float(p) for p in raw.split(",") if p)
        if kind == "ints":
            return tuple(int(p) for p in raw.split(",") if p)
        if kind == "strs":
            return tuple(p for p in raw.split(",") if p)
        if kind == "optstr":
            return None if raw.lower() == "none" else raw
        if kind == "optint":
            return None if raw.lower() == "none" else int(raw)
        parts = [p for p in raw.split(",") if p]
        if len(parts) == 1:
            return float(parts[0])
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from exc


PRESET_LINES = (
    ("rosenbrock_central", "finite-sum Rosenbrock, 8 centralized methods, "
                           "n=1000 d=5 T=150 U=10"),
    ("rosenbrock_dist", "finite-sum Rosenbrock across 10 workers, sign-average "
                        "and majority-vote methods, n0=1000 T=150"),
    ("logistic_central", "multinomial logistic regression from a CSV, "
                         "8 centralized methods"),
    ("logistic_dist", "multinomial logistic regression split across 10 workers"),
)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="signshuffle",
        description="Sign-based finite-sum optimization sweeps")
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="execute a sweep")
    run_p.add_argument("--config", help="JSON config file (flat keys)")
    run_p.add_argument("--preset", help="start from a named preset")
    run_p.add_argument("--scale", type=float,
                       help="shrink n and epochs by this factor")
    run_p.add_argument("--out", help="output directory (same as --out-dir)")
    for name in _FIELD_KINDS:
        if name == "out_dir":
            continue
        run_p.add_argument(f"--{name.replace('_', '-')}", dest=f"opt_{name}",
                           metavar="V", help=argparse.SUPPRESS)
    check_p = sub.add_parser("check", help="rerun theory checks on a stored trace")
    check_p.add_argument("--trace", required=True, help="path to a trace CSV")
    sub.add_parser("presets", help="list preset names")
    args = parser.parse_args(argv)
    if args.command == "presets":
        for name, blurb in PRESET_LINES:
            print(f"{name:20s} {blurb}")
        return 0
    if args.command == "check":
        return run_check(args.trace)
    try:
        overrides = {}
        for name in _FIELD_KINDS:
            raw = getattr(args, f"opt_{name}", None)
            if raw is not None:
                overrides[name] = _parse_flag(name, raw)
        if args.out is not None:
            overrides["out_dir"] = args.out
        config = build_config(args.preset, args.config, overrides, args.scale)
        summary = run_experiment(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    print(f"{len(summary['cells'])} cells -> {config.out_dir}/summary.json")
    for key, row in summary["best"].items():
        beta = "" if row["beta"] is None else f" beta={row['beta']:g}"
        print(f"best {key}: lr={row['lr']:g}{beta} final={row['final']:.4f}")
    for line in summary["lemmas"]:
        print(line)
    return 3 if summary["lemma_violations"] else 0
