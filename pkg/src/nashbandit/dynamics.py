"""Multi-agent mirror descent with oracle or bandit feedback.

Runs for several seeds are advanced in lock-step on stacked arrays. Each seed
owns its own per-player random streams, random numbers are drawn in fixed-size
chunks, and all reductions are row-wise, so a seed's trace does not depend on
which other seeds share its batch.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, ParameterError
from .feedback import BanditGeometry, NoiseModel, player_streams
from .games import Game
from .geometry import Regularizer

DRAW_CHUNK = 2048
DELTA_SHRINK = 0.9

SCHEDULE_MODES = ("oracle", "oracle-rate", "bandit-asymptotic", "theorem2")


@dataclass(frozen=True)
class Schedule:
    """Step size ``gamma / n**p`` and query radius ``delta0 / n**q`` for ``n = 1, 2, ...``."""

    gamma: float
    p: float = 1.0
    delta0: float = 0.1
    q: float = 1.0 / 3.0

    def step(self, n):
        return self.gamma / np.power(n, self.p)

    def radius(self, n):
        return self.delta0 / np.power(n, self.q)

    def validate(self, mode: str, beta: float | None = None) -> None:
        """Raise ``ConfigError`` unless the schedule is admissible for ``mode``.

        ``beta`` is the game's strong-monotonicity modulus in the sense
        ``<v(x) - v(x'), x - x'> <= -beta |x - x'|^2``.
        """
        if mode not in SCHEDULE_MODES:
            raise ConfigError(f"unknown schedule mode {mode!r}")
        if self.gamma <= 0 or not 0 < self.p <= 1:
            raise ConfigError("need gamma > 0 and 0 < p <= 1")
        if mode == "oracle":
            return
        if mode == "oracle-rate":
            if self.p != 1:
                raise ConfigError("the O(1/n) oracle rate needs p = 1")
            if beta is not None and self.gamma * beta <= 1:
                raise ConfigError(f"oracle rate needs gamma * beta > 1 (got {self.gamma * beta:g})")
            return
        if self.delta0 <= 0 or not 0 < self.q <= 1:
            raise ConfigError("need delta0 > 0 and 0 < q <= 1")
        if mode == "bandit-asymptotic":
            if self.p + self.q <= 1 or self.p - self.q <= 0.5:
                raise ConfigError(f"need p + q > 1 and p - q > 1/2 (got p={self.p}, q={self.q})")
            return
        if self.p != 1 or not math.isclose(self.q, 1 / 3):
            raise ConfigError("theorem2 schedule needs p = 1 and q = 1/3")
        if beta is not None and self.gamma <= 1 / (3 * beta):
            raise ConfigError(f"theorem2 schedule needs gamma > 1/(3 beta) = {1 / (3 * beta):g}")


PRESETS = {
    "theorem2": {"p": 1.0, "q": 1.0 / 3.0},
    "oracle-rate": {"p": 1.0},
}


@dataclass
class RunTrace:
    """Logged states of one run.

    Row ``k`` describes stage ``n[k]``: the pivot ``x_n`` before its update and
    the realized action played at that stage (equal to the pivot under oracle
    feedback). ``final`` is the pivot after the last stage.
    """

    seed: int
    n: np.ndarray
    pivot: np.ndarray
    realized: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray
    final: np.ndarray
    delta0: float = float("nan")
    sq_dist_realized: np.ndarray | None = None
    sq_dist_pivot: np.ndarray | None = None
    bregman: np.ndarray | None = None
    min_sq_dist_realized: float = float("nan")
    first_hit: int | None = None
    events: int = 0
    notes: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.n)


def log_grid(horizon: int, ratio: float | None = 1.2, stride: int | None = None) -> np.ndarray:
    """Stages to record: geometric with the given ratio, or every ``stride`` stages.

    Both variants always include stages 1 and ``horizon``.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if stride is not None:
        grid = np.arange(1, horizon + 1, stride)
    else:
        count = int(np.ceil(np.log(horizon) / np.log(ratio))) + 1
        grid = np.round(ratio ** np.arange(count + 1)).astype(np.int64)
    grid = np.unique(np.concatenate([[1, horizon], grid]))
    return grid[(grid >= 1) & (grid <= horizon)]


def step_md(reg: Regularizer, x, vhat, gamma_n: float) -> np.ndarray:
    """One mirror-descent step ``prox_x(gamma_n * vhat)``."""
    if gamma_n <= 0:
        raise ValueError("step size must be positive")
    return reg.prox(x, gamma_n * np.asarray(vhat, dtype=float))


def admissible_delta0(game: Game, delta0: float) -> float:
    """Shrink ``delta0`` to ``0.9 * min_i r_i`` when it is not below every safety radius."""
    min_r = min(s.safety_radius for s in game.sets)
    if delta0 < min_r:
        return delta0
    adjusted = DELTA_SHRINK * min_r
    warnings.warn(f"delta0={delta0} >= smallest safety radius {min_r}; using {adjusted}", stacklevel=3)
    return adjusted


def _draw_chunk(streams: Sequence[Sequence[np.random.Generator]], game: Game, scale: float = 1.0) -> np.ndarray:
    """Standard normals of shape ``(DRAW_CHUNK, seeds, dim)`` from per-seed, per-player streams."""
    per_seed = [
        np.concatenate([g.standard_normal((DRAW_CHUNK, s.dim)) for g, s in zip(gens, game.sets)], axis=-1)
        for gens in streams
    ]
    out = np.stack(per_seed, axis=1)
    return out * scale if scale != 1.0 else out


def simulate(game: Game, reg: Regularizer, schedule: Schedule, horizon: int, seeds: Sequence[int],
             feedback: str = "bandit", noise: NoiseModel | None = None, x0=None,
             log_at=None, x_star=None, weights=None, hit_radius: float | None = None) -> list[RunTrace]:
    """Run mirror descent for every seed in ``seeds``; one ``RunTrace`` per seed.

    Args:
        feedback: ``"bandit"`` (single-point SPSA), ``"oracle"`` (noisy gradient)
            or ``"exact"`` (noise-free gradient).
        x0: initial pivot; defaults to the base point of the safety balls.
        log_at: stages to record (default: geometric grid).
        x_star: reference equilibrium; when given the traces get distance metrics
            and the smallest realized distance over all stages.
        hit_radius: with ``x_star``, also record the first stage whose realized
            action lies strictly within this distance of ``x_star``.
    """
    if feedback not in ("bandit", "oracle", "exact"):
        raise ConfigError(f"unknown feedback mode {feedback!r}")
    if horizon < 1:
        raise ConfigError("horizon must be >= 1")
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ConfigError("need at least one seed")
    noise = noise or NoiseModel()
    x = game.base_point() if x0 is None else np.asarray(x0, dtype=float)
    game.check_feasible(x)
    reg.grad(x)  # domain check
    x = np.repeat(x[None, :], len(seeds), axis=0)

    log_at = log_grid(horizon) if log_at is None else np.unique(np.asarray(log_at, dtype=np.int64))
    if log_at.size == 0 or log_at[0] < 1 or log_at[-1] > horizon:
        raise ConfigError("log stages must lie in [1, horizon]")
    log_pos = {int(n): k for k, n in enumerate(log_at)}
    n_log = log_at.size
    pivots = np.empty((n_log, len(seeds), game.dim))
    realized = np.empty_like(pivots)

    delta0 = float("nan")
    bandit = feedback == "bandit"
    noisy = feedback == "oracle" and noise.active
    if bandit:
        delta0 = admissible_delta0(game, schedule.delta0)
        geo = BanditGeometry(game)
    streams = [player_streams(s, game.n_players) for s in seeds]
    owner = game.owner
    track = x_star is not None
    if track:
        target = x_star.x if hasattr(x_star, "x") else np.asarray(x_star, dtype=float)
        best = np.full(len(seeds), np.inf)
        hit_sq = -1.0 if hit_radius is None else float(hit_radius) ** 2
        first_hit = np.zeros(len(seeds), dtype=np.int64)

    n = 1
    while n <= horizon:
        steps = np.arange(n, min(n + DRAW_CHUNK, horizon + 1))
        gammas = schedule.gamma / np.power(steps.astype(float), schedule.p)
        if bandit:
            deltas = delta0 / np.power(steps.astype(float), schedule.q)
            directions = geo.directions(_draw_chunk(streams, game))
            base, radius, eff = geo.base, geo.radius, geo.eff_dim
        elif noisy:
            xi = _draw_chunk(streams, game, noise.sigma)
        for k, stage in enumerate(steps):
            if bandit:
                z = directions[k]
                delta = deltas[k]
                xhat = x + delta * (z - (x - base) / radius)
                u = game._payoffs(xhat)
                y = (gammas[k] * eff / delta) * u[:, owner] * z
            else:
                xhat = x
                y = game._gradient(x)
                if noisy:
                    y = y + xi[k]
                y = gammas[k] * y
            if track:
                diff = xhat - target
                sq = (diff * diff).sum(axis=-1)
                np.minimum(best, sq, out=best)
                first_hit = np.where((first_hit == 0) & (sq < hit_sq), stage, first_hit)
            pos = log_pos.get(int(stage))
            if pos is not None:
                pivots[pos] = x
                realized[pos] = xhat
            x = reg.prox(x, y)
        n = int(steps[-1]) + 1

    log_f = log_at.astype(float)
    traces = []
    for j, seed in enumerate(seeds):
        tr = RunTrace(
            seed=seed,
            n=log_at.copy(),
            pivot=pivots[:, j].copy(),
            realized=realized[:, j].copy(),
            gamma=schedule.step(log_f),
            delta=schedule.radius(log_f) * (delta0 / schedule.delta0) if bandit else np.zeros(n_log),
            final=x[j].copy(),
            delta0=delta0,
            events=horizon,
        )
        if track:
            tr.min_sq_dist_realized = float(best[j])
            if hit_radius is not None and first_hit[j] > 0:
                tr.first_hit = int(first_hit[j])
        if bandit and delta0 != schedule.delta0:
            tr.notes.append(f"delta0 rescaled from {schedule.delta0} to {delta0}")
        traces.append(tr)
    if x_star is not None:
        from .equilibrium import metrics

        for tr in traces:
            metrics(tr, x_star, reg, game.weights if weights is None else weights)
    return traces


def run_oracle(game: Game, reg: Regularizer, schedule: Schedule, horizon: int, noise: NoiseModel | None = None,
               seed: int = 0, x0=None, log_at=None, x_star=None) -> RunTrace:
    """Mirror descent driven by a (possibly noisy) first-order oracle."""
    noise = noise or NoiseModel()
    mode = "oracle" if noise.active else "exact"
    return simulate(game, reg, schedule, horizon, [seed], mode, noise, x0, log_at, x_star)[0]


def run_bandit(game: Game, reg: Regularizer, schedule: Schedule, horizon: int, seed: int = 0,
               x0=None, log_at=None, x_star=None) -> RunTrace:
    """Mirror descent with single-point SPSA payoff feedback."""
    return simulate(game, reg, schedule, horizon, [seed], "bandit", None, x0, log_at, x_star)[0]


# -- Chung's lemma -------------------------------------------------------------


@dataclass
class ChungResult:
    n: np.ndarray
    scaled: np.ndarray
    limit: float
    final_scaled: float

    @property
    def relative_error(self) -> float:
        if self.limit == 0:
            return abs(self.final_scaled)
        return abs(self.final_scaled / self.limit - 1)


def chung_recursion(P: float, Q: float, p: float, q: float, a1: float, horizon: int,
                    log_at=None) -> ChungResult:
    """Iterate ``a_{n+1} = a_n (1 - P/n^p) + Q/n^(p+q)`` and track ``n^q a_n``.

    The predicted limit of ``n^q a_n`` is ``Q/R`` with ``R = P - q`` when
    ``p = 1`` and ``R = P`` otherwise.
    """
    if not 0 < p <= 1 or q <= 0 or P <= 0 or Q < 0:
        raise ConfigError("need 0 < p <= 1, q > 0, P > 0 and Q >= 0")
    if p == 1 and P <= q:
        raise ConfigError("with p = 1 the recursion needs P > q")
    R = P - q if p == 1 else P
    log_at = log_grid(horizon) if log_at is None else np.asarray(log_at, dtype=np.int64)
    wanted = set(int(v) for v in log_at)
    a = float(a1)
    rec_n, rec_v = [], []
    for n in range(1, horizon + 1):
        if n in wanted:
            rec_n.append(n)
            rec_v.append(n**q * a)
        if n < horizon:
            a = a * (1 - P / n**p) + Q / n ** (p + q)
    return ChungResult(np.array(rec_n), np.array(rec_v), Q / R, horizon**q * a)
