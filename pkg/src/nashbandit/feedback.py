"""Gradient feedback: exact, noisy first-order oracle, and single-point SPSA.

The bandit estimator follows the one-shot scheme: each player draws a unit
direction ``z_i`` on the sphere of its tangent space, moves its pivot toward
the base point of its safety ball, plays ``x_i + delta * w_i`` with
``w_i = z_i - (x_i - p_i) / r_i``, observes one payoff ``u_i`` and reports
``(d_i / delta) * u_i * z_i``. Here ``d_i`` is the dimension of the sampling
sphere's ambient tangent space (``dim - 1`` on a simplex).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParameterError
from .games import Game
from .sets import ActionSet, normalize_directions


def player_streams(seed: int, n_players: int) -> list[np.random.Generator]:
    """Independent counter-based generators, one per player, for one seed."""
    children = np.random.SeedSequence(seed).spawn(n_players)
    return [np.random.Generator(np.random.Philox(child)) for child in children]


def _as_streams(rng, n_players: int) -> Sequence[np.random.Generator]:
    if isinstance(rng, np.random.Generator):
        return [rng] * n_players
    if len(rng) != n_players:
        raise ValueError("need one generator per player")
    return rng


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean additive oracle noise with per-coordinate standard deviation ``sigma``."""

    kind: str = "none"
    sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "gaussian"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")

    @classmethod
    def gaussian(cls, sigma: float) -> "NoiseModel":
        return cls("gaussian", float(sigma))

    @property
    def active(self) -> bool:
        return self.kind == "gaussian" and self.sigma > 0


def oracle_estimate(game: Game, x, noise: NoiseModel, rng) -> np.ndarray:
    """Stochastic first-order oracle ``v(x) + xi``."""
    x = np.asarray(x, dtype=float)
    v = game.gradient(x)
    if not noise.active:
        return v
    streams = _as_streams(rng, game.n_players)
    xi = np.empty_like(v)
    for gen, b in zip(streams, game.blocks):
        xi[..., b] = noise.sigma * gen.standard_normal(v[..., b].shape)
    return v + xi


def sample_direction(action_set: ActionSet, rng: np.random.Generator) -> np.ndarray:
    """Uniform unit vector on the tangent sphere of ``action_set``."""
    return action_set.sample_direction(rng)


@dataclass
class FeedbackEvent:
    """One stage of bandit feedback at a pivot.

    ``bias`` and ``noise`` are filled only in instrumented calls: ``bias`` is
    ``v(x_delta) - v(x)`` and ``noise`` is ``v_hat - v(x_delta)``. Both are exact
    splits for payoffs that are at most quadratic (Cournot, quadratic games);
    otherwise the O(delta) smoothing error lands in ``noise``.
    """

    pivot: np.ndarray
    adjusted_pivot: np.ndarray
    direction: np.ndarray
    perturbation: np.ndarray
    query: np.ndarray
    payoffs: np.ndarray
    estimate: np.ndarray
    bias: np.ndarray | None = None
    noise: np.ndarray | None = None


class BanditGeometry:
    """Per-coordinate constants of the SPSA estimator for one game."""

    def __init__(self, game: Game):
        self.game = game
        self.base = game.base_point()
        self.radius = np.repeat([s.safety_radius for s in game.sets], game.dims)
        self.eff_dim = np.repeat([s.effective_dim for s in game.sets], game.dims).astype(float)
        self.min_radius = float(min(s.safety_radius for s in game.sets))
        self.all_full = all(s.kind != "simplex" for s in game.sets)

    def directions(self, gaussian: np.ndarray) -> np.ndarray:
        """Turn raw standard normals ``(..., dim)`` into per-player unit tangent directions."""
        out = np.empty_like(gaussian)
        for s, b in zip(self.game.sets, self.game.blocks):
            out[..., b] = normalize_directions(s, gaussian[..., b])
        return out

    def query(self, x: np.ndarray, z: np.ndarray, delta: float):
        """Perturbation ``w`` and realized query point ``x + delta * w``."""
        w = z - (x - self.base) / self.radius
        return w, x + delta * w

    def estimate(self, u: np.ndarray, z: np.ndarray, delta: float) -> np.ndarray:
        return (self.eff_dim / delta) * u[..., self.game.owner] * z


def _check_delta(game: Game, delta: float) -> None:
    min_r = min(s.safety_radius for s in game.sets)
    if not 0 < delta < min_r:
        raise ParameterError(f"query radius {delta} must lie in (0, {min_r}) (smallest safety radius)")


def spsa_estimate(game: Game, x, delta: float, rng, instrument: bool = False) -> FeedbackEvent:
    """Single-point SPSA gradient estimate with feasibility adjustment.

    Args:
        game: the game; only payoffs are queried (plus exact gradients when
            ``instrument`` is set).
        x: the pivot profile.
        delta: query radius, strictly below every safety radius.
        rng: a generator, or one generator per player.
        instrument: also compute the bias/noise split.
    """
    x = np.asarray(x, dtype=float)
    _check_delta(game, delta)
    game.check_feasible(x)
    geo = BanditGeometry(game)
    streams = _as_streams(rng, game.n_players)
    z = np.concatenate([sample_direction(s, g) for s, g in zip(game.sets, streams)])
    w, xhat = geo.query(x, z, delta)
    u = game.payoffs(xhat, validate=False)
    vhat = geo.estimate(u, z, delta)
    x_delta = x - delta * (x - geo.base) / geo.radius
    event = FeedbackEvent(x, x_delta, z, w, xhat, u, vhat)
    if instrument:
        v_shift = game.gradient(x_delta, validate=False)
        event.bias = v_shift - game.gradient(x, validate=False)
        event.noise = vhat - v_shift
    return event


@dataclass
class SmoothedGradient:
    mean: np.ndarray
    stderr: np.ndarray
    samples: int


def smoothed_gradient_reference(game: Game, x, delta: float, mc_samples: int, rng,
                                batch: int = 1 << 18) -> SmoothedGradient:
    """Monte-Carlo mean and standard error of the SPSA estimate at a fixed pivot.

    The mean estimates the gradient of the smoothed payoff at the adjusted
    pivot. Samples are processed in batches to bound memory.
    """
    x = np.asarray(x, dtype=float)
    _check_delta(game, delta)
    game.check_feasible(x)
    geo = BanditGeometry(game)
    streams = _as_streams(rng, game.n_players)
    total = np.zeros(game.dim)
    total_sq = np.zeros(game.dim)
    done = 0
    while done < mc_samples:
        m = min(batch, mc_samples - done)
        raw = np.concatenate([g.standard_normal((m, s.dim)) for s, g in zip(game.sets, streams)], axis=-1)
        z = geo.directions(raw)
        _, xhat = geo.query(x, z, delta)
        vhat = geo.estimate(game.payoffs(xhat, validate=False), z, delta)
        total += vhat.sum(axis=0)
        total_sq += (vhat * vhat).sum(axis=0)
        done += m
    mean = total / done
    var = np.maximum(total_sq / done - mean**2, 0.0) * done / max(done - 1, 1)
    return SmoothedGradient(mean, np.sqrt(var / done), done)


def second_moment(game: Game, x, delta: float, mc_samples: int, rng) -> float:
    """Monte-Carlo estimate of ``E |v_hat|^2`` at a fixed pivot."""
    x = np.asarray(x, dtype=float)
    _check_delta(game, delta)
    geo = BanditGeometry(game)
    streams = _as_streams(rng, game.n_players)
    raw = np.concatenate([g.standard_normal((mc_samples, s.dim)) for s, g in zip(game.sets, streams)], axis=-1)
    z = geo.directions(raw)
    _, xhat = geo.query(x, z, delta)
    vhat = geo.estimate(game.payoffs(xhat, validate=False), z, delta)
    return float(np.mean(np.sum(vhat * vhat, axis=-1)))
