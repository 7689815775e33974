"""Randomized invariant suites behind the ``check`` command.

Each suite returns a list of ``CheckResult``. The checks sample random inputs
and compare library output against identities that must hold exactly (up to
rounding) for every input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .feedback import BanditGeometry
from .games import AuctionGame, CournotGame, QuadraticGame, check_monotone, weighted_hessian
from .geometry import Regularizer
from .sets import ActionSet

IDENTITY_TOL = 1e-9
INEQUALITY_SLACK = 1e-12


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def euclidean_fixture() -> Regularizer:
    sets = [
        ActionSet.box(np.full(3, -1.0), np.full(3, 1.0)),
        ActionSet.simplex(4, mass=2.0),
        ActionSet.ball(np.array([0.5, -0.5]), 1.5),
        ActionSet.budget(3, 1.0),
    ]
    return Regularizer(sets, "euclidean")


def entropic_fixture() -> Regularizer:
    return Regularizer([ActionSet.simplex(3), ActionSet.simplex(5, mass=2.0)], "entropic")


def _sample(reg: Regularizer, rng: np.random.Generator, size: int) -> np.ndarray:
    # Dirichlet sampling on simplices keeps entropic points in the relative interior
    return np.concatenate([s.sample(rng, size) for s in reg.sets], axis=-1)


def _violations(lhs, rhs) -> int:
    return int(np.sum(lhs > rhs + INEQUALITY_SLACK * np.maximum(1.0, np.abs(rhs))))


def bregman_suite(reg: Regularizer, samples: int = 10_000, rng=None, label: str = "") -> list[CheckResult]:
    """Three-point identity, quadratic lower bound, prox/mirror agreement and descent inequality."""
    rng = np.random.default_rng(0) if rng is None else rng
    tag = f"[{label}] " if label else ""
    p, x, x2 = (_sample(reg, rng, samples) for _ in range(3))
    y = rng.standard_normal(p.shape) * rng.uniform(0.01, 3.0, (samples, 1))
    K = reg.modulus
    out = []

    lhs = reg.bregman(p, x2)
    rhs = reg.bregman(p, x) + reg.bregman(x, x2) + np.sum((reg.grad(x) - reg.grad(x2)) * (p - x), axis=-1)
    err = float(np.max(np.abs(lhs - rhs)))
    out.append(CheckResult(f"{tag}three-point identity", err <= IDENTITY_TOL, f"max error {err:.2e} on {samples} triples"))

    bound = 0.5 * K * np.sum((x - p) ** 2, axis=-1)
    bad = _violations(bound, reg.bregman(p, x))
    out.append(CheckResult(f"{tag}strong-convexity lower bound", bad == 0, f"{bad} violations on {samples} pairs"))

    plus = reg.prox(x, y)
    err = float(np.max(np.abs(plus - reg.mirror(reg.grad(x) + y))))
    out.append(CheckResult(f"{tag}prox equals mirror of shifted gradient", err <= IDENTITY_TOL,
                           f"max error {err:.2e} on {samples} inputs"))

    lhs = reg.bregman(p, plus)
    rhs = reg.bregman(p, x) + np.sum(y * (x - p), axis=-1) + np.sum(y * y, axis=-1) / (2 * K)
    bad = _violations(lhs, rhs)
    out.append(CheckResult(f"{tag}descent inequality", bad == 0, f"{bad} violations on {samples} inputs"))
    return out


def monotone_suite(samples: int = 1000, rng=None) -> list[CheckResult]:
    """Exact Cournot Hessian and sampled negative definiteness for Cournot and the auction."""
    rng = np.random.default_rng(0) if rng is None else rng
    cournot = CournotGame(2.0, 1.0, [0.8, 1.0, 1.2])
    expected = -cournot.b * (np.ones((3, 3)) + np.eye(3))
    x = cournot.sample_profile(rng, samples)
    exact = all(np.array_equal(weighted_hessian(cournot, row), expected) for row in x[:100])
    out = [CheckResult("cournot hessian is -b(1 + I)", exact, "compared exactly on 100 profiles")]
    auction = AuctionGame(gains=[1.0, 2.0, 0.5], quantities=[1.0, 2.0], barriers=[0.5, 1.0], budgets=[1.0, 2.0, 1.5])
    for name, game in (("cournot", cournot), ("auction", auction)):
        verdict = check_monotone(game, samples=samples, rng=rng)
        out.append(CheckResult(f"{name} z^T H z < 0", verdict.monotone,
                               f"max form {verdict.max_quadratic_form:.3e} on {samples} samples"))
    return out


def feedback_suite(samples: int = 1000, rng=None) -> list[CheckResult]:
    """Bandit queries stay feasible for random pivots and admissible radii."""
    rng = np.random.default_rng(0) if rng is None else rng
    games = {
        "cournot": CournotGame(2.0, 1.0, [0.8, 1.0, 1.2]),
        "auction": AuctionGame([1.0, 2.0], [1.0, 1.0], [0.5, 0.5], [1.0, 1.0]),
        "quadratic": QuadraticGame([2, 2], [0.3, -0.2, 0.1, 0.4], coupling=0.5),
    }
    out = []
    for name, game in games.items():
        geo = BanditGeometry(game)
        x = game.sample_profile(rng, samples)
        z = geo.directions(rng.standard_normal((samples, game.dim)))
        delta = rng.uniform(0, geo.min_radius, (samples, 1))
        _, query = geo.query(x, z, delta)
        worst = max(float(np.max(s.distance(query[:, b]))) for s, b in zip(game.sets, game.blocks))
        out.append(CheckResult(f"{name} queries feasible", worst <= 1e-10,
                               f"max distance to action set {worst:.2e} on {samples} queries"))
    return out


SUITES = ("bregman", "monotone", "feedback")


def run_suites(names=SUITES, samples: int | None = None, seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    results = []
    for name in names:
        if name == "bregman":
            n = samples or 10_000
            results += bregman_suite(euclidean_fixture(), n, rng, "euclidean")
            results += bregman_suite(entropic_fixture(), n, rng, "entropic")
        elif name == "monotone":
            results += monotone_suite(samples or 1000, rng)
        elif name == "feedback":
            results += feedback_suite(samples or 1000, rng)
        else:
            raise ValueError(f"unknown suite {name!r}; expected one of {SUITES}")
    return results
