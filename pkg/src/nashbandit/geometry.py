"""Regularizers, Bregman divergences, prox-mappings and mirror maps.

Two distance-generating functions are supported per player:

* ``euclidean``: ``h(x) = |x|^2 / 2`` on any action set. The prox-mapping is
  the Euclidean projection of ``x + y``.
* ``entropic``: ``h(x) = sum_j x_j log x_j`` on a simplex. The prox-mapping is
  the multiplicative-weights update.

The aggregate regularizer is the sum of the per-player ones.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DomainError
from .sets import ActionSet

REGULARIZER_KINDS = ("euclidean", "entropic")


def project_set(action_set: ActionSet, z) -> np.ndarray:
    """Exact Euclidean projection of ``z`` onto ``action_set``."""
    return action_set.project(np.asarray(z, dtype=float))


def _xlogx(x):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


class Regularizer:
    """Per-player distance-generating functions over a product of action sets.

    Args:
        sets: the players' action sets.
        kinds: a single kind for every player or one kind per player.
    """

    def __init__(self, sets: Sequence[ActionSet], kinds: str | Sequence[str] = "euclidean"):
        self.sets = list(sets)
        if isinstance(kinds, str):
            kinds = [kinds] * len(self.sets)
        self.kinds = list(kinds)
        if len(self.kinds) != len(self.sets):
            raise ValueError("need one regularizer kind per player")
        for kind, s in zip(self.kinds, self.sets):
            if kind not in REGULARIZER_KINDS:
                raise ValueError(f"unknown regularizer {kind!r}")
            if kind == "entropic" and s.kind != "simplex":
                raise ValueError("the entropic regularizer only attaches to simplex action sets")
        dims = [s.dim for s in self.sets]
        offsets = np.concatenate([[0], np.cumsum(dims)])
        self.blocks = [slice(int(a), int(b)) for a, b in zip(offsets[:-1], offsets[1:])]
        # moduli in the l2 norm; for the entropic kind 1/mass is the l1 modulus, which also bounds l2
        self.moduli = np.array([1.0 if k == "euclidean" else 1.0 / s.mass for k, s in zip(self.kinds, self.sets)])
        self._box_bounds = None
        if all(k == "euclidean" and s.kind == "box" for k, s in zip(self.kinds, self.sets)):
            self._box_bounds = (np.concatenate([s.lower for s in self.sets]), np.concatenate([s.upper for s in self.sets]))

    @classmethod
    def for_game(cls, game, kinds: str | Sequence[str] = "euclidean") -> "Regularizer":
        return cls(game.sets, kinds)

    @property
    def modulus(self) -> float:
        """Aggregate strong-convexity modulus ``K = min_i K_i``."""
        return float(self.moduli.min())

    def _check_domain(self, x, block, kind):
        if kind == "entropic" and np.any(x[..., block] <= 0):
            raise DomainError("entropic regularizer needs strictly positive coordinates")

    # -- the function and its gradient -------------------------------------

    def value_blocks(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = []
        for kind, b in zip(self.kinds, self.blocks):
            xb = x[..., b]
            out.append(0.5 * np.sum(xb * xb, axis=-1) if kind == "euclidean" else np.sum(_xlogx(xb), axis=-1))
        return np.stack(out, axis=-1)

    def value(self, x) -> np.ndarray:
        return self.value_blocks(x).sum(axis=-1)

    def grad(self, x) -> np.ndarray:
        """Gradient selection ``nabla h`` on the domain of subdifferentiability."""
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        for kind, b in zip(self.kinds, self.blocks):
            self._check_domain(x, b, kind)
            out[..., b] = x[..., b] if kind == "euclidean" else 1.0 + np.log(x[..., b])
        return out

    # -- Bregman divergence --------------------------------------------------

    def bregman_blocks(self, p, x) -> np.ndarray:
        """Per-player divergences ``D_i(p_i, x_i)``, shape ``(..., N)``."""
        p = np.asarray(p, dtype=float)
        x = np.asarray(x, dtype=float)
        out = []
        for kind, b in zip(self.kinds, self.blocks):
            pb, xb = p[..., b], x[..., b]
            if kind == "euclidean":
                diff = pb - xb
                out.append(0.5 * np.sum(diff * diff, axis=-1))
            else:
                self._check_domain(x, b, kind)
                # sum p log(p/x) - sum p + sum x, which is KL when the masses agree
                div = _xlogx(pb) - pb * np.log(xb) - pb + xb
                out.append(np.sum(div, axis=-1))
        return np.stack(out, axis=-1)

    def bregman(self, p, x, weights=None) -> np.ndarray:
        """``D(p, x) = h(p) - h(x) - <nabla h(x), p - x>``; weighted sum if ``weights`` is given."""
        blocks = self.bregman_blocks(p, x)
        if weights is not None:
            blocks = blocks * np.asarray(weights, dtype=float)
        return blocks.sum(axis=-1)

    # -- prox-mapping and mirror map -----------------------------------------

    def prox(self, x, y) -> np.ndarray:
        """``argmin_{x'} <y, x - x'> + D(x', x)``."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self._box_bounds is not None:
            return np.clip(x + y, *self._box_bounds)
        out = np.empty(np.broadcast_shapes(x.shape, y.shape))
        for kind, s, b in zip(self.kinds, self.sets, self.blocks):
            if kind == "euclidean":
                out[..., b] = s.project(x[..., b] + y[..., b])
            else:
                self._check_domain(x, b, kind)
                out[..., b] = _multiplicative_weights(np.log(x[..., b]) + y[..., b], s.mass)
        return out

    def mirror(self, y) -> np.ndarray:
        """Mirror map ``argmax_x <y, x> - h(x)``, the gradient of the convex conjugate."""
        y = np.asarray(y, dtype=float)
        out = np.empty_like(y)
        for kind, s, b in zip(self.kinds, self.sets, self.blocks):
            if kind == "euclidean":
                out[..., b] = s.project(y[..., b])
            else:
                out[..., b] = _multiplicative_weights(y[..., b], s.mass)
        return out


def _multiplicative_weights(logits, mass: float) -> np.ndarray:
    logits = logits - logits.max(axis=-1, keepdims=True)
    w = np.exp(logits)
    out = mass * w / w.sum(axis=-1, keepdims=True)
    # keep the iterate in the relative interior when exp underflows
    tiny = np.finfo(float).tiny
    if np.any(out < tiny):
        out = np.maximum(out, tiny)
        out = mass * out / out.sum(axis=-1, keepdims=True)
    return out
