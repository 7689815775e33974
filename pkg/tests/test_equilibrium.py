import numpy as np
import pytest

from nashbandit.dynamics import RunTrace
from nashbandit.equilibrium import (
    EquilibriumSolution,
    cournot_equilibrium,
    first_order_residual,
    metrics,
    solve,
    solve_extragradient,
)
from nashbandit.errors import NonConvergenceError
from nashbandit.games import AuctionGame, CournotGame, QuadraticGame, vi_gap
from nashbandit.geometry import Regularizer


def test_cournot_closed_form_examples():
    sol = cournot_equilibrium(2.0, 1.0, [1.0, 1.0])
    assert np.allclose(sol.x, [1 / 3, 1 / 3], atol=1e-15) and sol.method == "closed-form"
    assert cournot_equilibrium(2.0, 1.0, [1.0]).x == pytest.approx([0.5])
    assert np.array_equal(cournot_equilibrium(2.0, 1.0, [2.0, 2.0, 2.0]).x, np.zeros(3))


def test_cournot_symmetric_formula():
    a, b, c, n = 5.0, 0.7, 1.5, 4
    sol = cournot_equilibrium(a, b, [c] * n)
    assert np.allclose(sol.x, (a - c) / (b * (n + 1)))


def test_cournot_boundary_case_uses_solver():
    # the high-cost firm would produce a negative quantity in the unconstrained solution
    sol = cournot_equilibrium(1.0, 1.0, [0.9, 0.1], capacities=1.0)
    assert sol.method == "extragradient"
    assert np.allclose(sol.x, [0.0, 0.45], atol=1e-7)
    with pytest.raises(ValueError):
        cournot_equilibrium(1.0, 1.0, [1.5, 0.1])


def test_extragradient_recovers_known_equilibria():
    x_star = np.array([0.3, -0.2, 0.1, 0.4])
    game = QuadraticGame([2, 2], x_star, coupling=0.8)
    assert np.allclose(solve_extragradient(game).x, x_star, atol=1e-8)
    sol = solve_extragradient(CournotGame(2.0, 1.0, [1.0, 1.0]), tol=1e-8)
    assert np.allclose(sol.x, [1 / 3, 1 / 3], atol=1e-8)


def test_symmetric_auction_has_symmetric_equilibrium():
    game = AuctionGame([1.5, 1.5], [2.0], [0.5], [1.0, 1.0])
    sol = solve(game)
    assert sol.x[0] == pytest.approx(sol.x[1], abs=1e-8)
    # interior first-order condition g q c / T^2 = 1 with T = c + 2x
    assert 1.5 * 2.0 * (0.5 + sol.x[1]) / (0.5 + 2 * sol.x[0]) ** 2 == pytest.approx(1.0, abs=1e-6)


def test_solver_agrees_with_linear_system_on_random_cournot():
    rng = np.random.default_rng(0)
    checked = 0
    while checked < 20:
        n = int(rng.integers(2, 5))
        a, b = rng.uniform(2, 5), rng.uniform(0.5, 2)
        costs = rng.uniform(0, 1, n)
        game = CournotGame(a, b, costs)
        # first-order conditions b (I + 11^T) x = a - c, valid when the solution is interior
        oracle = np.linalg.solve(b * (np.eye(n) + np.ones((n, n))), a - costs)
        if np.any(oracle <= 0) or np.any(oracle >= game.capacities):
            continue
        checked += 1
        assert cournot_equilibrium(a, b, costs).method == "closed-form"
        assert np.abs(cournot_equilibrium(a, b, costs).x - oracle).max() < 1e-12
        assert np.linalg.norm(solve_extragradient(game).x - oracle) < 1e-6


def test_extragradient_lands_on_the_same_point_from_random_starts():
    game = AuctionGame([1.0, 2.0, 0.5], [1.0, 2.0], [0.5, 1.0], [1.0, 2.0, 1.5])
    rng = np.random.default_rng(1)
    ends = np.stack([solve_extragradient(game, x0=game.sample_profile(rng)).x for _ in range(10)])
    assert np.abs(ends - ends[0]).max() < 1e-5


@pytest.mark.parametrize("game", [
    CournotGame(2.0, 1.0, [0.8, 1.0, 1.2]),
    AuctionGame([1.0, 2.0, 0.5], [1.0, 2.0], [0.5, 1.0], [1.0, 2.0, 1.5]),
    QuadraticGame([2, 2], [0.3, -0.2, 0.1, 0.4], coupling=0.5),
], ids=["cournot", "auction", "quadratic"])
def test_equilibrium_invariants(game):
    sol = solve(game)
    rng = np.random.default_rng(2)
    assert sol.residual <= 1e-6
    assert first_order_residual(game, sol.x, 1000, rng) <= 1e-6
    others = game.sample_profile(rng, 1000)
    gaps = [vi_gap(game, x, sol.x) for x in others]
    assert max(gaps) < 0


def test_non_convergence_reports_residual():
    game = QuadraticGame([2], [0.5, 0.5], coupling=0.0)
    with pytest.raises(NonConvergenceError) as info:
        solve_extragradient(game, tol=1e-12, max_iter=3)
    assert info.value.residual > 0


def _trace(points):
    points = np.asarray(points, dtype=float)
    return RunTrace(seed=0, n=np.arange(1, len(points) + 1), pivot=points, realized=points.copy(),
                    gamma=np.ones(len(points)), delta=np.zeros(len(points)), final=points[-1])


def test_metrics_on_constant_trace_vanish():
    x_star = np.array([0.2, 0.4])
    reg = Regularizer.for_game(CournotGame(2.0, 1.0, [1.0, 1.0]))
    tr = metrics(_trace([x_star] * 3), EquilibriumSolution(x_star, 0.0, "closed-form"), reg)
    assert np.all(tr.sq_dist_realized == 0) and np.all(tr.sq_dist_pivot == 0) and np.all(tr.bregman == 0)


def test_euclidean_metrics():
    x_star = np.array([0.2, 0.4])
    pts = np.array([[0.0, 0.0], [1.0, 0.5], [0.3, 0.3]])
    reg = Regularizer.for_game(CournotGame(2.0, 1.0, [1.0, 1.0]))
    tr = metrics(_trace(pts), x_star, reg)
    expected = np.sum((pts - x_star) ** 2, axis=-1)
    assert np.array_equal(tr.sq_dist_pivot, expected)
    assert np.allclose(tr.bregman, 0.5 * expected, atol=1e-16)
    weighted = metrics(_trace(pts), x_star, reg, [2.0, 1.0]).bregman
    assert np.allclose(weighted, 0.5 * (2 * (pts[:, 0] - 0.2) ** 2 + (pts[:, 1] - 0.4) ** 2), atol=1e-16)
