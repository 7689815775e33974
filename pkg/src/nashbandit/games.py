"""Concave N-person games over compact convex action sets.

An action profile is a flat float array of length ``game.dim`` holding the
players' action vectors back to back; ``game.blocks`` gives each player's
slice. Payoff and gradient evaluators accept stacks of profiles with shape
``(..., dim)`` so that many independent runs can be advanced together.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import FeasibilityError
from .sets import FEASIBILITY_TOL, ActionSet

HESSIAN_FD_STEP = 1e-4
GRADIENT_FD_STEP = 1e-6


class Game:
    """Base class: players, action sets, payoffs and individual gradients.

    Subclasses implement ``_payoffs`` and ``_gradient`` on stacked profiles,
    and may override ``jacobian`` with a closed form.

    Attributes:
        sets: one ``ActionSet`` per player.
        weights: positive monotonicity weights (lambda), one per player.
        beta: strong-monotonicity modulus when known, i.e. the largest
            ``beta`` with ``sum_i w_i <v_i(x) - v_i(x'), x_i - x'_i> <= -beta |x - x'|^2``.
        equilibrium: closed-form Nash equilibrium when available.
    """

    name = "game"

    def __init__(self, sets: Sequence[ActionSet], weights=None, beta: float | None = None, equilibrium=None):
        self.sets = list(sets)
        self.dims = np.array([s.dim for s in self.sets])
        self.offsets = np.concatenate([[0], np.cumsum(self.dims)])
        self.blocks = [slice(int(a), int(b)) for a, b in zip(self.offsets[:-1], self.offsets[1:])]
        self.owner = np.repeat(np.arange(self.n_players), self.dims)
        self.weights = np.ones(self.n_players) if weights is None else np.asarray(weights, dtype=float)
        if self.weights.shape != (self.n_players,) or np.any(self.weights <= 0):
            raise ValueError("weights must be positive, one per player")
        self.beta = beta
        self.equilibrium = None if equilibrium is None else np.asarray(equilibrium, dtype=float)

    @property
    def n_players(self) -> int:
        return len(self.sets)

    @property
    def dim(self) -> int:
        return int(self.offsets[-1])

    def split(self, x: np.ndarray) -> list[np.ndarray]:
        """Per-player views of a profile (or stack of profiles)."""
        return [x[..., b] for b in self.blocks]

    def base_point(self) -> np.ndarray:
        return np.concatenate([s.base_point for s in self.sets])

    def project(self, z: np.ndarray) -> np.ndarray:
        out = np.empty_like(np.asarray(z, dtype=float))
        for s, b in zip(self.sets, self.blocks):
            out[..., b] = s.project(z[..., b])
        return out

    def sample_profile(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        return np.concatenate([s.sample(rng, size) for s in self.sets], axis=-1)

    def sample_interior_profile(self, rng: np.random.Generator, size: int | None = None, shrink: float = 0.9):
        """Random profiles pulled toward the base point, hence strictly interior."""
        x = self.sample_profile(rng, size)
        return shrink * x + (1 - shrink) * self.base_point()

    def check_feasible(self, x: np.ndarray, tol: float = FEASIBILITY_TOL) -> None:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(f"profile has dimension {x.shape[-1]}, game has {self.dim}")
        for i, (s, b) in enumerate(zip(self.sets, self.blocks)):
            dist = float(np.max(s.distance(x[..., b])))
            if dist > tol:
                raise FeasibilityError(i, dist)

    # -- evaluation -------------------------------------------------------

    def payoffs(self, x, validate: bool = True) -> np.ndarray:
        """Payoff vector ``(u_1(x), ..., u_N(x))``."""
        x = np.asarray(x, dtype=float)
        if validate:
            self.check_feasible(x)
        return self._payoffs(x)

    def gradient(self, x, validate: bool = True) -> np.ndarray:
        """Individual payoff gradients ``v(x)``, block ``i`` being d u_i / d x_i."""
        x = np.asarray(x, dtype=float)
        if validate:
            self.check_feasible(x)
        return self._gradient(x)

    def _payoffs(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _gradient(self, x: np.ndarray) -> np.ndarray:
        # central differences of each player's payoff in their own coordinates
        h = GRADIENT_FD_STEP
        out = np.empty_like(x)
        for k in range(self.dim):
            e = np.zeros(self.dim)
            e[k] = h
            i = self.owner[k]
            out[..., k] = (self._payoffs(x + e)[..., i] - self._payoffs(x - e)[..., i]) / (2 * h)
        return out

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        """Matrix ``J[k, l] = d v_k / d x_l`` at a single profile.

        Default: central differences of the gradient evaluator.
        """
        x = np.asarray(x, dtype=float)
        h = HESSIAN_FD_STEP
        jac = np.empty((self.dim, self.dim))
        for ell in range(self.dim):
            e = np.zeros(self.dim)
            e[ell] = h
            jac[:, ell] = (self._gradient(x + e) - self._gradient(x - e)) / (2 * h)
        return jac


class CournotGame(Game):
    """Linear-demand Cournot oligopoly.

    Firm ``i`` produces ``x_i in [0, C_i]`` and earns
    ``x_i * (a - b * sum(x)) - c_i * x_i``.
    """

    name = "cournot"

    def __init__(self, a: float, b: float, costs, capacities=None):
        self.a = float(a)
        self.b = float(b)
        self.costs = np.atleast_1d(np.asarray(costs, dtype=float))
        if self.a <= 0 or self.b <= 0:
            raise ValueError("Cournot needs a, b > 0")
        n = self.costs.size
        caps = np.full(n, self.a / self.b) if capacities is None else np.broadcast_to(np.asarray(capacities, float), (n,))
        self.capacities = np.array(caps, dtype=float)
        sets = [ActionSet.box(0.0, cap) for cap in self.capacities]
        # the Hessian is -b(I + J); its largest eigenvalue is -b
        super().__init__(sets, beta=self.b)

    def _payoffs(self, x):
        price = self.a - self.b * x.sum(axis=-1, keepdims=True)
        return x * price - self.costs * x

    def _gradient(self, x):
        return self.a - self.b * x.sum(axis=-1, keepdims=True) - self.b * x - self.costs

    def jacobian(self, x):
        n = self.n_players
        return -self.b * (np.ones((n, n)) + np.eye(n))


class AuctionGame(Game):
    """Proportional-allocation resource auction.

    Player ``i`` bids ``x_ir >= 0`` on resource ``r`` with ``sum_r x_ir <= budget_i``
    and earns ``sum_r g_i q_r x_ir / (c_r + sum_j x_jr) - x_ir``.
    Weights default to ``1/g_i``, which makes the game monotone.
    """

    name = "auction"

    def __init__(self, gains, quantities, barriers, budgets):
        self.gains = np.atleast_1d(np.asarray(gains, dtype=float))
        self.quantities = np.atleast_1d(np.asarray(quantities, dtype=float))
        self.barriers = np.atleast_1d(np.asarray(barriers, dtype=float))
        n, m = self.gains.size, self.quantities.size
        self.budgets = np.array(np.broadcast_to(np.asarray(budgets, float), (n,)))
        if self.barriers.shape != (m,):
            raise ValueError("one entry barrier per resource")
        if np.any(self.barriers <= 0):
            raise ValueError("entry barriers must be positive so that payoffs are defined everywhere")
        self.n_resources = m
        sets = [ActionSet.budget(m, b) for b in self.budgets]
        super().__init__(sets, weights=1.0 / self.gains)

    def _bids(self, x):
        return x.reshape(x.shape[:-1] + (self.n_players, self.n_resources))

    def _payoffs(self, x):
        bids = self._bids(x)
        total = self.barriers + bids.sum(axis=-2, keepdims=True)
        share = self.gains[:, None] * self.quantities * bids / total
        return (share - bids).sum(axis=-1)

    def _gradient(self, x):
        bids = self._bids(x)
        total = self.barriers + bids.sum(axis=-2, keepdims=True)
        grad = self.gains[:, None] * self.quantities * (total - bids) / total**2 - 1.0
        return grad.reshape(x.shape)

    def jacobian(self, x):
        bids = self._bids(np.asarray(x, dtype=float))
        n, m = self.n_players, self.n_resources
        total = self.barriers + bids.sum(axis=0)
        others = total - bids
        jac = np.zeros((n, m, n, m))
        for r in range(m):
            coeff = self.gains * self.quantities[r] / total[r] ** 3
            block = coeff[:, None] * (total[r] - 2 * others[:, r])[:, None] * np.ones((n, n))
            block[np.diag_indices(n)] = -2 * coeff * others[:, r]
            jac[:, r, :, r] = block
        return jac.reshape(n * m, n * m)


class QuadraticGame(Game):
    """Synthetic strongly monotone game with a known equilibrium.

    Individual gradients are ``v(x) = -beta (x - x*) + A (x - x*)`` with ``A``
    skew-symmetric and zero on the diagonal blocks, so that each
    ``u_i = offset - beta/2 |x_i - x*_i|^2 + <x_i - x*_i, (A (x - x*))_i>``
    integrates its own block of ``v`` exactly.
    """

    name = "quadratic"

    def __init__(self, dims, x_star, beta: float = 1.0, coupling: float | np.ndarray = 0.0,
                 offset: float = 0.0, lower: float = -1.0, upper: float = 1.0):
        dims = [int(d) for d in np.atleast_1d(dims)]
        sets = [ActionSet.box(np.full(d, lower), np.full(d, upper)) for d in dims]
        x_star = np.asarray(x_star, dtype=float)
        super().__init__(sets, beta=float(beta), equilibrium=x_star)
        if x_star.shape != (self.dim,):
            raise ValueError("x_star has the wrong dimension")
        self.check_feasible(x_star)
        self.offset = float(offset)
        if np.ndim(coupling) == 0:
            self.coupling = _skew_coupling(dims, float(coupling))
        else:
            self.coupling = np.asarray(coupling, dtype=float)
            if not np.allclose(self.coupling, -self.coupling.T, atol=0):
                raise ValueError("coupling matrix must be skew-symmetric")
            for b in self.blocks:
                if np.any(self.coupling[b, b] != 0):
                    raise ValueError("coupling must vanish on diagonal blocks")

    def _coupled(self, e):
        # row-wise reduction keeps results independent of the batch size
        return (e[..., None, :] * self.coupling).sum(axis=-1)

    def _payoffs(self, x):
        e = x - self.equilibrium
        per_coord = -0.5 * self.beta * e * e + e * self._coupled(e)
        return self.offset + np.add.reduceat(per_coord, self.offsets[:-1], axis=-1)

    def _gradient(self, x):
        e = x - self.equilibrium
        return -self.beta * e + self._coupled(e)

    def jacobian(self, x):
        return -self.beta * np.eye(self.dim) + self.coupling


def _skew_coupling(dims, strength: float) -> np.ndarray:
    d = sum(dims)
    offsets = np.concatenate([[0], np.cumsum(dims)])
    mat = np.zeros((d, d))
    for i in range(len(dims)):
        for j in range(i + 1, len(dims)):
            block = strength * np.eye(dims[i], dims[j])
            mat[offsets[i]:offsets[i + 1], offsets[j]:offsets[j + 1]] = block
            mat[offsets[j]:offsets[j + 1], offsets[i]:offsets[i + 1]] = -block.T
    return mat


class CallableGame(Game):
    """A game defined by a user-supplied payoff function.

    ``payoff_fn`` maps one profile of shape ``(dim,)`` to the payoff vector.
    ``gradient_fn`` is optional; when omitted, gradients come from central
    differences. Hessians always use finite differences.
    """

    name = "callable"

    def __init__(self, sets, payoff_fn: Callable, gradient_fn: Callable | None = None, **kwargs):
        super().__init__(sets, **kwargs)
        self._payoff_fn = payoff_fn
        self._gradient_fn = gradient_fn

    def _payoffs(self, x):
        flat = x.reshape(-1, self.dim)
        out = np.array([self._payoff_fn(row) for row in flat], dtype=float)
        return out.reshape(x.shape[:-1] + (self.n_players,))

    def _gradient(self, x):
        if self._gradient_fn is None:
            return super()._gradient(x)
        flat = x.reshape(-1, self.dim)
        out = np.array([self._gradient_fn(row) for row in flat], dtype=float)
        return out.reshape(x.shape)


# -- monotonicity -----------------------------------------------------------


def weighted_hessian(game: Game, x, weights=None) -> np.ndarray:
    """Lambda-weighted game Hessian at ``x``.

    Block ``(i, j)`` is ``(w_i/2) d_j v_i + (w_j/2) (d_i v_j)^T``; the result
    is symmetric by construction.
    """
    x = np.asarray(x, dtype=float)
    game.check_feasible(x)
    w = game.weights if weights is None else np.asarray(weights, dtype=float)
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    scaled = w[game.owner][:, None] * game.jacobian(x)
    return 0.5 * (scaled + scaled.T)


@dataclass
class MonotoneVerdict:
    """Outcome of the sampled second-order monotonicity test."""

    monotone: bool
    max_quadratic_form: float
    samples: int
    witness: tuple[np.ndarray, np.ndarray] | None = None

    def __bool__(self) -> bool:
        return self.monotone


def tangent_direction(game: Game, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal(game.dim)
    for s, b in zip(game.sets, game.blocks):
        z[b] = s.tangent(z[b])
    return z / np.linalg.norm(z)


def check_monotone(game: Game, weights=None, samples: int = 1000, rng=None) -> MonotoneVerdict:
    """Sample profiles and tangent directions and test ``z^T H z < 0``.

    This gathers evidence of monotonicity; it is not a proof.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(0) if rng is None else rng
    worst = -np.inf
    for _ in range(samples):
        x = game.sample_profile(rng)
        z = tangent_direction(game, rng)
        form = float(z @ weighted_hessian(game, x, weights) @ z)
        worst = max(worst, form)
        if form >= 0:
            return MonotoneVerdict(False, worst, samples, witness=(x, z))
    return MonotoneVerdict(True, worst, samples)


def vi_gap(game: Game, x, x_ref, weights=None) -> float:
    """``sum_i w_i <v_i(x), x_i - x_ref_i>``; negative away from x* in monotone games."""
    x = np.asarray(x, dtype=float)
    x_ref = np.asarray(x_ref, dtype=float)
    game.check_feasible(x_ref)
    w = game.weights if weights is None else np.asarray(weights, dtype=float)
    terms = game.gradient(x) * (x - x_ref)
    return float(np.sum(w[game.owner] * terms))


# -- construction from config ----------------------------------------------

GAME_KINDS = ("cournot", "auction", "quadratic")


def make_game(description: dict) -> Game:
    """Build a game from a ``{"kind": ..., "params": {...}}`` mapping."""
    kind = description.get("kind")
    params = dict(description.get("params", {}))
    if kind == "cournot":
        return CournotGame(**params)
    if kind == "auction":
        return AuctionGame(**params)
    if kind == "quadratic":
        return QuadraticGame(**params)
    raise ValueError(f"unknown game kind {kind!r}; expected one of {GAME_KINDS}")
