"""Compact convex action sets: boxes, simplices, Euclidean balls and budget sets.

Every set carries an interior *base point* together with a *safety radius*
such that the closed ball of that radius around the base point (intersected
with the affine hull of the set) stays inside the set. The bandit estimator
uses this pair to keep its query points feasible.

All array-valued methods act on the last axis, so a stack of points with
shape ``(..., dim)`` is handled in one call.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FEASIBILITY_TOL = 1e-10

KINDS = ("box", "simplex", "ball", "budget")


def project_simplex(z: np.ndarray, mass: float = 1.0) -> np.ndarray:
    """Euclidean projection onto ``{x >= 0, sum(x) = mass}`` along the last axis.

    Sort-based O(d log d) method: find the largest ``k`` such that the
    shifted k-th largest coordinate stays positive, then threshold.
    """
    z = np.asarray(z, dtype=float)
    d = z.shape[-1]
    u = -np.sort(-z, axis=-1)
    css = np.cumsum(u, axis=-1) - mass
    k = np.arange(1, d + 1)
    positive = u - css / k > 0
    # index of the last True entry; the first entry is always True
    rho = d - 1 - np.argmax(positive[..., ::-1], axis=-1)
    theta = np.take_along_axis(css, rho[..., None], axis=-1) / (rho[..., None] + 1)
    return np.maximum(z - theta, 0.0)


@dataclass(frozen=True, eq=False)
class ActionSet:
    """A player's action set.

    Use the ``box``, ``simplex``, ``ball`` and ``budget`` constructors rather
    than instantiating directly.
    """

    kind: str
    dim: int
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    mass: float = 1.0
    center: np.ndarray | None = None
    radius: float = 1.0
    base_point: np.ndarray = field(default=None)
    safety_radius: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown set kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.kind == "simplex" and self.dim < 2:
            raise ValueError("a simplex needs dim >= 2 (affine-hull dimension >= 1)")
        if self.safety_radius <= 0:
            raise ValueError("safety_radius must be positive")

    # -- constructors -----------------------------------------------------

    @classmethod
    def box(cls, lower, upper, base_point=None, safety_radius=None) -> "ActionSet":
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        lower, upper = np.broadcast_arrays(lower, upper)
        if np.any(upper <= lower):
            raise ValueError("box needs upper > lower in every coordinate")
        p = (lower + upper) / 2 if base_point is None else np.asarray(base_point, dtype=float)
        r = float(np.min(np.minimum(p - lower, upper - p))) if safety_radius is None else float(safety_radius)
        return cls("box", lower.size, lower=lower.copy(), upper=upper.copy(), base_point=p, safety_radius=r)

    @classmethod
    def simplex(cls, dim: int, mass: float = 1.0, base_point=None, safety_radius=None) -> "ActionSet":
        if dim < 2:
            raise ValueError("a simplex needs dim >= 2 (affine-hull dimension >= 1)")
        p = np.full(dim, mass / dim) if base_point is None else np.asarray(base_point, dtype=float)
        # in-radius of the simplex measured inside its affine hull
        r = mass / np.sqrt(dim * (dim - 1)) if safety_radius is None else float(safety_radius)
        return cls("simplex", dim, mass=float(mass), base_point=p, safety_radius=r)

    @classmethod
    def ball(cls, center, radius: float, base_point=None, safety_radius=None) -> "ActionSet":
        c = np.atleast_1d(np.asarray(center, dtype=float))
        p = c.copy() if base_point is None else np.asarray(base_point, dtype=float)
        r = float(radius) if safety_radius is None else float(safety_radius)
        return cls("ball", c.size, center=c, radius=float(radius), base_point=p, safety_radius=r)

    @classmethod
    def budget(cls, dim: int, total: float, base_point=None, safety_radius=None) -> "ActionSet":
        """The down-closed simplex ``{x >= 0, sum(x) <= total}``."""
        inradius = total / (dim + np.sqrt(dim))
        p = np.full(dim, inradius) if base_point is None else np.asarray(base_point, dtype=float)
        r = inradius if safety_radius is None else float(safety_radius)
        return cls("budget", dim, mass=float(total), base_point=p, safety_radius=r)

    # -- geometry ---------------------------------------------------------

    @property
    def effective_dim(self) -> int:
        """Dimension of the affine hull (and of the sampling sphere)."""
        return self.dim - 1 if self.kind == "simplex" else self.dim

    def project(self, z: np.ndarray) -> np.ndarray:
        """Exact Euclidean projection onto the set."""
        z = np.asarray(z, dtype=float)
        if self.kind == "box":
            return np.clip(z, self.lower, self.upper)
        if self.kind == "simplex":
            return project_simplex(z, self.mass)
        if self.kind == "ball":
            diff = z - self.center
            norm = np.linalg.norm(diff, axis=-1, keepdims=True)
            scale = np.minimum(1.0, self.radius / np.maximum(norm, np.finfo(float).tiny))
            return self.center + diff * scale
        clipped = np.maximum(z, 0.0)
        inside = clipped.sum(axis=-1, keepdims=True) <= self.mass
        return np.where(inside, clipped, project_simplex(z, self.mass))

    def distance(self, x: np.ndarray) -> np.ndarray:
        """Euclidean distance from ``x`` to the set."""
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - self.project(x), axis=-1)

    def contains(self, x: np.ndarray, tol: float = FEASIBILITY_TOL) -> bool:
        return bool(np.all(self.distance(x) <= tol))

    def tangent(self, z: np.ndarray) -> np.ndarray:
        """Orthogonal projection onto the tangent space of the affine hull."""
        z = np.asarray(z, dtype=float)
        if self.kind == "simplex":
            return z - z.mean(axis=-1, keepdims=True)
        return z

    def diameter(self) -> float:
        if self.kind == "box":
            return float(np.linalg.norm(self.upper - self.lower))
        if self.kind == "ball":
            return 2 * self.radius
        return float(np.sqrt(2) * self.mass)

    # -- sampling ---------------------------------------------------------

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """Random points of the set (uniform for box, ball, simplex, budget)."""
        shape = () if size is None else (size,)
        if self.kind == "box":
            return rng.uniform(self.lower, self.upper, size=shape + (self.dim,))
        if self.kind == "simplex":
            return self.mass * rng.dirichlet(np.ones(self.dim), size=size)
        if self.kind == "budget":
            return self.mass * rng.dirichlet(np.ones(self.dim + 1), size=size)[..., :-1]
        g = rng.standard_normal(shape + (self.dim,))
        g /= np.linalg.norm(g, axis=-1, keepdims=True)
        rad = self.radius * rng.uniform(size=shape + (1,)) ** (1.0 / self.dim)
        return self.center + g * rad

    def sample_direction(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """Uniform unit vector on the sphere of the tangent space.

        For one-dimensional sets this is a fair coin on {-1, +1}.
        """
        shape = () if size is None else (size,)
        return normalize_directions(self, rng.standard_normal(shape + (self.dim,)))


def normalize_directions(action_set: ActionSet, gaussian: np.ndarray) -> np.ndarray:
    """Map isotropic Gaussian draws to uniform unit tangent directions."""
    g = action_set.tangent(gaussian)
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def check_safety_ball(action_set: ActionSet, rng: np.random.Generator, samples: int = 256) -> bool:
    """Sampling check that the safety sphere around the base point is feasible."""
    z = action_set.sample_direction(rng, samples)
    pts = action_set.base_point + action_set.safety_radius * z
    return action_set.contains(pts, tol=1e-9)
