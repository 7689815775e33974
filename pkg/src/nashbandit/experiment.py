"""Experiment configuration, multi-seed execution, aggregation and export.

A run is described by a JSON document such as::

    {
      "schema_version": 1,
      "game": {"kind": "quadratic", "params": {"dims": [2, 2], "x_star": [0.3, -0.2, 0.1, 0.4]}},
      "regularizer": "euclidean",
      "feedback": "bandit",
      "preset": "theorem2",
      "schedule": {"gamma": 1.0, "delta0": 0.1},
      "horizon": 100000,
      "seeds": 50
    }

``run_experiment`` solves for the equilibrium, simulates every seed, and
writes ``traces/<seed>.csv``, ``aggregate.csv`` and ``summary.json``.
"""

from __future__ import annotations

import csv
import json
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dynamics import PRESETS, RunTrace, Schedule, log_grid, simulate
from .equilibrium import EquilibriumSolution, solve
from .errors import ConfigError, EstimationError
from .feedback import NoiseModel
from .games import Game, make_game
from .geometry import Regularizer

SCHEMA_VERSION = 1
FEEDBACK_MODES = ("exact", "oracle", "bandit")
MIN_FIT_POINTS = 5
# the default window is the last decade [T/10, T]; below this horizon it would reach into n < 10
MIN_DEFAULT_FIT_HORIZON = 100

AGGREGATE_COLUMNS = (
    "n", "mean_sq_dist_realized", "mean_sq_dist_pivot", "stderr", "mean_bregman", "gamma_n", "delta_n",
)
TRACE_COLUMNS = ("n", "sq_dist_realized", "sq_dist_pivot", "bregman", "gamma_n", "delta_n")


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


@dataclass
class ExperimentConfig:
    """Validated experiment description; see the module docstring for the JSON form."""

    game: dict
    regularizer: str | list[str] = "euclidean"
    feedback: str = "bandit"
    sigma: float = 0.0
    schedule: dict = field(default_factory=dict)
    preset: str | None = None
    horizon: int = 1000
    seeds: list[int] = field(default_factory=lambda: [0])
    log_ratio: float = 1.2
    log_stride: int | None = None
    fit_window: list[float] | None = None
    x0: list[float] | None = None
    out: str | None = None
    threads: int | None = None
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version!r} (expected {SCHEMA_VERSION})")
        if not isinstance(self.game, dict) or "kind" not in self.game:
            raise ConfigError("game must be a mapping with a 'kind' entry")
        if self.feedback not in FEEDBACK_MODES:
            raise ConfigError(f"feedback must be one of {FEEDBACK_MODES}")
        if self.preset is not None and self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; expected one of {sorted(PRESETS)}")
        if self.sigma < 0:
            raise ConfigError("sigma must be non-negative")
        if int(self.horizon) < 1:
            raise ConfigError("horizon must be >= 1")
        self.horizon = int(self.horizon)
        if isinstance(self.seeds, (int, np.integer)):
            self.seeds = list(range(int(self.seeds)))
        self.seeds = [int(s) for s in self.seeds]
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        unknown = set(self.schedule) - {"gamma", "p", "delta0", "q"}
        if unknown:
            raise ConfigError(f"unknown schedule keys {sorted(unknown)}")
        if "gamma" not in self.schedule:
            raise ConfigError("schedule needs gamma")
        if self.preset is not None:
            clash = {k for k, v in PRESETS[self.preset].items() if k in self.schedule and self.schedule[k] != v}
            if clash:
                raise ConfigError(f"schedule keys {sorted(clash)} contradict preset {self.preset!r}")
        if self.fit_window is not None and (len(self.fit_window) != 2 or not 0 < self.fit_window[0] < self.fit_window[1]):
            raise ConfigError("fit_window must be [n_lo, n_hi] with 0 < n_lo < n_hi")
        if self.threads is not None and int(self.threads) < 1:
            raise ConfigError("threads must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        if "schema_version" not in data:
            raise ConfigError("config is missing schema_version")
        if "game" not in data:
            raise ConfigError("config is missing game")
        return cls(**data)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def with_overrides(self, **changes) -> "ExperimentConfig":
        data = self.to_dict()
        data.update({k: v for k, v in changes.items() if v is not None})
        return ExperimentConfig.from_dict(data)

    # -- derived objects -------------------------------------------------------

    def make_schedule(self) -> Schedule:
        params = dict(self.schedule)
        if self.preset is not None:
            params.update(PRESETS[self.preset])
        return Schedule(**params)

    @property
    def schedule_mode(self) -> str:
        if self.preset == "theorem2":
            return "theorem2"
        if self.preset == "oracle-rate":
            return "oracle-rate"
        return "bandit-asymptotic" if self.feedback == "bandit" else "oracle"

    def noise(self) -> NoiseModel:
        if self.feedback == "oracle" and self.sigma > 0:
            return NoiseModel.gaussian(self.sigma)
        return NoiseModel()

    def log_stages(self) -> np.ndarray:
        return log_grid(self.horizon, self.log_ratio, self.log_stride)

    def window(self) -> tuple[float, float] | None:
        """Fit window: the configured one, else the last decade when the horizon allows it."""
        if self.fit_window is not None:
            return float(self.fit_window[0]), float(self.fit_window[1])
        if self.horizon < MIN_DEFAULT_FIT_HORIZON:
            return None
        return self.horizon / 10, float(self.horizon)

    def build(self) -> tuple[Game, Regularizer, Schedule]:
        """Construct and cross-validate the game, regularizer and schedule."""
        try:
            game = make_game(self.game)
        except TypeError as exc:
            raise ConfigError(f"bad game parameters: {exc}") from exc
        reg = Regularizer.for_game(game, self.regularizer)
        schedule = self.make_schedule()
        schedule.validate(self.schedule_mode, game.beta)
        if self.x0 is not None:
            game.check_feasible(np.asarray(self.x0, dtype=float))
        return game, reg, schedule


@dataclass
class RateFit:
    """Least-squares line through ``(log n, log y)``."""

    slope: float
    intercept: float
    r2: float
    window: tuple[float, float]
    points: int


def fit_power_law(n, y, window: Sequence[float]) -> RateFit:
    """Fit ``log y = intercept + slope * log n`` over ``window[0] <= n <= window[1]``."""
    n = np.asarray(n, dtype=float)
    y = np.asarray(y, dtype=float)
    lo, hi = float(window[0]), float(window[1])
    mask = (n >= lo) & (n <= hi)
    if mask.sum() < MIN_FIT_POINTS:
        raise EstimationError(f"need at least {MIN_FIT_POINTS} logged points in [{lo:g}, {hi:g}], got {int(mask.sum())}")
    if np.any(y[mask] <= 0) or not np.all(np.isfinite(y[mask])):
        raise EstimationError("log-log fit needs positive finite values")
    lx, ly = np.log(n[mask]), np.log(y[mask])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (intercept + slope * lx)
    total = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 if total == 0 else 1.0 - float(np.sum(resid**2)) / float(total)
    return RateFit(float(slope), float(intercept), r2, (lo, hi), int(mask.sum()))


@dataclass
class AggregateResult:
    """Across-seed statistics on the shared logging grid.

    Means are computed by summing the seeds in order and dividing by their
    count; ``stderr`` is the sample standard deviation of the realized
    squared distance divided by the square root of the number of seeds.
    """

    n: np.ndarray
    mean_sq_dist_realized: np.ndarray
    mean_sq_dist_pivot: np.ndarray
    stderr: np.ndarray
    mean_bregman: np.ndarray
    gamma_n: np.ndarray
    delta_n: np.ndarray
    seeds: list[int]
    terminals: list[dict]
    fit: RateFit | None = None
    fit_error: str | None = None

    def rows(self):
        for k in range(len(self.n)):
            yield [getattr(self, col)[k] for col in AGGREGATE_COLUMNS]


def fit_rate(aggregate: AggregateResult, window: Sequence[float],
             column: str = "mean_sq_dist_realized") -> RateFit:
    """Log-log slope of an aggregate column over ``window``."""
    return fit_power_law(aggregate.n, getattr(aggregate, column), window)


def _seed_mean(values: np.ndarray) -> np.ndarray:
    total = values[0].copy()
    for row in values[1:]:
        total = total + row
    return total / len(values)


def aggregate(traces: Sequence[RunTrace], window: Sequence[float] | None = None) -> AggregateResult:
    """Combine per-seed traces that share a logging grid and carry distance metrics."""
    if not traces:
        raise EstimationError("no traces to aggregate")
    grid = traces[0].n
    for tr in traces:
        if not np.array_equal(tr.n, grid):
            raise EstimationError("traces were logged on different grids")
        if tr.sq_dist_realized is None:
            raise EstimationError("traces carry no distance metrics (run with x_star)")
    realized = np.stack([tr.sq_dist_realized for tr in traces])
    stderr = (np.std(realized, axis=0, ddof=1) / np.sqrt(len(traces)) if len(traces) > 1
              else np.full(len(grid), np.nan))
    terminals = [
        {
            "seed": tr.seed,
            "sq_dist_realized": float(tr.sq_dist_realized[-1]),
            "sq_dist_pivot": float(tr.sq_dist_pivot[-1]),
            "bregman": float(tr.bregman[-1]),
            "min_sq_dist_realized": float(tr.min_sq_dist_realized),
            "final_pivot": [float(v) for v in tr.final],
            "notes": list(tr.notes),
        }
        for tr in traces
    ]
    result = AggregateResult(
        n=grid.copy(),
        mean_sq_dist_realized=_seed_mean(realized),
        mean_sq_dist_pivot=_seed_mean(np.stack([tr.sq_dist_pivot for tr in traces])),
        stderr=stderr,
        mean_bregman=_seed_mean(np.stack([tr.bregman for tr in traces])),
        gamma_n=traces[0].gamma.copy(),
        delta_n=traces[0].delta.copy(),
        seeds=[tr.seed for tr in traces],
        terminals=terminals,
    )
    if window is not None:
        try:
            result.fit = fit_rate(result, window)
        except EstimationError as exc:
            result.fit_error = str(exc)
    return result


# -- output --------------------------------------------------------------------


def write_trace(trace: RunTrace, path: str | os.PathLike) -> None:
    dim = trace.pivot.shape[1]
    header = list(TRACE_COLUMNS) + [f"pivot_{k}" for k in range(dim)] + [f"realized_{k}" for k in range(dim)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for k in range(len(trace.n)):
            row = [trace.n[k], trace.sq_dist_realized[k], trace.sq_dist_pivot[k], trace.bregman[k],
                   trace.gamma[k], trace.delta[k], *trace.pivot[k], *trace.realized[k]]
            writer.writerow([_fmt(v) for v in row])


def read_trace(path: str | os.PathLike) -> dict[str, np.ndarray]:
    """Columns of a trace CSV as float arrays (``n`` as integers)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = {name: np.array([float(r[k]) for r in body]) for k, name in enumerate(header)}
    cols["n"] = cols["n"].astype(np.int64)
    return cols


def write_aggregate(result: AggregateResult, path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(AGGREGATE_COLUMNS)
        for row in result.rows():
            writer.writerow([_fmt(v) for v in row])


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    return obj


def summary_dict(config: ExperimentConfig, result: AggregateResult, equilibrium: EquilibriumSolution,
                 schedule: Schedule) -> dict:
    fit = result.fit
    return _json_safe({
        "schema_version": SCHEMA_VERSION,
        "slope": None if fit is None else fit.slope,
        "intercept": None if fit is None else fit.intercept,
        "r2": None if fit is None else fit.r2,
        "window": None if fit is None else list(fit.window),
        "fit_points": None if fit is None else fit.points,
        "fit_error": result.fit_error,
        "equilibrium": {"x": equilibrium.x, "method": equilibrium.method, "residual": equilibrium.residual},
        "schedule": asdict(schedule),
        "seeds": result.seeds,
        "terminals": result.terminals,
        "config": config.to_dict(),
    })


# -- execution -------------------------------------------------------------------


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    equilibrium: EquilibriumSolution
    aggregate: AggregateResult
    traces: list[RunTrace]
    summary: dict
    out: Path | None = None


def _run_seeds(config_data: dict, seeds: list[int], x_star: list[float]) -> list[RunTrace]:
    config = ExperimentConfig.from_dict(config_data)
    game, reg, schedule = config.build()
    x0 = None if config.x0 is None else np.asarray(config.x0, dtype=float)
    with warnings.catch_warnings():
        # a rescaled delta0 is reported through the trace notes instead
        warnings.simplefilter("ignore")
        return simulate(game, reg, schedule, config.horizon, seeds, config.feedback, config.noise(), x0,
                        config.log_stages(), np.asarray(x_star))


def _chunks(seeds: list[int], parts: int) -> list[list[int]]:
    parts = max(1, min(parts, len(seeds)))
    bounds = np.linspace(0, len(seeds), parts + 1).round().astype(int)
    return [seeds[a:b] for a, b in zip(bounds[:-1], bounds[1:])]


def run_experiment(config: ExperimentConfig, out: str | os.PathLike | None = None) -> ExperimentResult:
    """Solve for the equilibrium, run every seed, aggregate, and write outputs.

    Seeds are split into contiguous groups, one per worker process (default:
    available cores). Because each seed's randomness is private, the traces
    do not depend on the grouping, and results are assembled in seed order.
    Each group's trace files are written as soon as that group finishes, so
    completed traces survive a failure in a later group.
    """
    game, reg, schedule = config.build()
    equilibrium = solve(game)
    out = out if out is not None else config.out
    out_dir = None
    if out is not None:
        out_dir = Path(out)
        (out_dir / "traces").mkdir(parents=True, exist_ok=True)

    threads = int(config.threads or os.cpu_count() or 1)
    groups = _chunks(config.seeds, threads)
    data = config.to_dict()
    x_star = equilibrium.x.tolist()
    traces: list[RunTrace] = []

    def collect(batch: list[RunTrace]) -> None:
        traces.extend(batch)
        if out_dir is not None:
            for tr in batch:
                write_trace(tr, out_dir / "traces" / f"{tr.seed}.csv")

    if len(groups) == 1:
        collect(_run_seeds(data, groups[0], x_star))
    else:
        with ProcessPoolExecutor(max_workers=len(groups)) as pool:
            futures = [pool.submit(_run_seeds, data, group, x_star) for group in groups]
            failure = None
            for fut in futures:
                try:
                    collect(fut.result())
                except Exception as exc:  # keep collecting the groups that did finish
                    failure = failure or exc
            if failure is not None:
                raise failure

    result = aggregate(traces, config.window())
    summary = summary_dict(config, result, equilibrium, schedule)
    if out_dir is not None:
        write_aggregate(result, out_dir / "aggregate.csv")
        with open(out_dir / "summary.json", "w") as fh:
            json.dump(summary, fh, indent=2)
            fh.write("\n")
    return ExperimentResult(config, equilibrium, result, traces, summary, out_dir)
