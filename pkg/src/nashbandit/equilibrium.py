"""Reference Nash equilibria and distance metrics for learning runs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonConvergenceError
from .games import CournotGame, Game
from .geometry import Regularizer

RESIDUAL_SAMPLES = 1000


@dataclass
class EquilibriumSolution:
    """A Nash equilibrium with a sampled first-order residual.

    ``residual`` is the largest value of ``<v_i(x*), x_i - x*_i>`` seen over
    random feasible deviations (clipped at zero); it is ~0 at a true
    equilibrium.
    """

    x: np.ndarray
    residual: float
    method: str
    iterations: int = 0


def first_order_residual(game: Game, x_star, samples: int = RESIDUAL_SAMPLES, rng=None) -> float:
    rng = np.random.default_rng(12345) if rng is None else rng
    x_star = np.asarray(x_star, dtype=float)
    v = game.gradient(x_star)
    dev = game.sample_profile(rng, samples)
    worst = 0.0
    for b in game.blocks:
        gaps = (dev[:, b] - x_star[b]) @ v[b]
        worst = max(worst, float(gaps.max()))
    return worst


def cournot_equilibrium(a: float, b: float, costs, capacities=None) -> EquilibriumSolution:
    """Nash equilibrium of the linear Cournot game.

    Solves ``a - b S - b x_i - c_i = 0`` in closed form; if the solution leaves
    the capacity box the extragradient solver takes over.
    """
    game = CournotGame(a, b, costs, capacities)
    costs = game.costs
    if np.any(costs > a):
        raise ValueError("need a >= max(c_i)")
    n = costs.size
    total = np.sum(a - costs) / (b * (n + 1))
    x = (a - costs) / b - total
    if np.all(x >= 0) and np.all(x <= game.capacities):
        return EquilibriumSolution(x, first_order_residual(game, x), "closed-form")
    return solve_extragradient(game)


def estimate_lipschitz(game: Game, rng=None, pairs: int = 64, rel_tol: float = 0.05, max_rounds: int = 8) -> float:
    """Sampled Lipschitz constant of ``v``; the pair count doubles until the max ratio settles."""
    rng = np.random.default_rng(7) if rng is None else rng
    best = 0.0
    for _ in range(max_rounds):
        x = game.sample_profile(rng, pairs)
        y = game.sample_profile(rng, pairs)
        num = np.linalg.norm(game.gradient(x) - game.gradient(y), axis=-1)
        den = np.linalg.norm(x - y, axis=-1)
        new = max(best, float(np.max(num / np.maximum(den, 1e-300))))
        if best > 0 and new <= best * (1 + rel_tol):
            return new
        best = new
        pairs *= 2
    return best


def solve_extragradient(game: Game, tol: float = 1e-8, max_iter: int = 1_000_000, x0=None,
                        step: float | None = None) -> EquilibriumSolution:
    """Projected extragradient on the individual gradient field.

    Uses the fixed step ``0.5 / L`` with ``L`` a sampled Lipschitz estimate.
    Stops once consecutive iterates are within ``tol`` and the a-posteriori
    bound ``rho / (1 - rho) * move`` on the distance to the fixed point is
    below ``tol`` too, where ``rho`` is the observed contraction ratio.
    """
    if step is None:
        lip = estimate_lipschitz(game)
        step = 0.5 / lip if lip > 0 else 1.0
    x = game.base_point() if x0 is None else np.asarray(x0, dtype=float)
    game.check_feasible(x)
    move = np.inf
    for it in range(1, max_iter + 1):
        lead = game.project(x + step * game.gradient(x, validate=False))
        new = game.project(x + step * game.gradient(lead, validate=False))
        prev, move = move, float(np.linalg.norm(new - x))
        x = new
        rho = move / prev if prev > 0 else 0.0
        if move == 0 or (move < tol and rho < 1 and move * rho / (1 - rho) < tol):
            return EquilibriumSolution(x, first_order_residual(game, x), "extragradient", it)
    raise NonConvergenceError(f"extragradient did not converge in {max_iter} iterations", move)


def solve(game: Game, **kwargs) -> EquilibriumSolution:
    """Closed form when the game knows it, extragradient otherwise."""
    if game.equilibrium is not None:
        return EquilibriumSolution(game.equilibrium.copy(), first_order_residual(game, game.equilibrium), "closed-form")
    if isinstance(game, CournotGame):
        return cournot_equilibrium(game.a, game.b, game.costs, game.capacities)
    return solve_extragradient(game, **kwargs)


def metrics(trace, x_star, reg: Regularizer, weights=None):
    """Fill squared distances and the weighted Bregman divergence to ``x_star``.

    The divergence is ``sum_i w_i D(x*_i, x_{n,i})`` along the pivots.
    """
    x_star = x_star.x if isinstance(x_star, EquilibriumSolution) else np.asarray(x_star, dtype=float)
    trace.sq_dist_realized = np.sum((trace.realized - x_star) ** 2, axis=-1)
    trace.sq_dist_pivot = np.sum((trace.pivot - x_star) ** 2, axis=-1)
    trace.bregman = reg.bregman(x_star, trace.pivot, weights)
    return trace
