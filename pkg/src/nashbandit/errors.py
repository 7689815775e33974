"""Exception types raised across the package."""

from __future__ import annotations


class NashBanditError(Exception):
    """Base class for all package errors."""


class FeasibilityError(NashBanditError, ValueError):
    """An action profile lies outside the game's action space."""

    def __init__(self, player: int, distance: float):
        self.player = player
        self.distance = distance
        super().__init__(f"player {player} action is infeasible (distance {distance:.3e} to its action set)")


class DomainError(NashBanditError, ValueError):
    """A point is outside the domain of subdifferentiability of a regularizer."""


class ParameterError(NashBanditError, ValueError):
    """Invalid algorithm or model parameter (e.g. query radius too large)."""


class ConfigError(NashBanditError, ValueError):
    """Invalid schedule or experiment configuration."""


class NonConvergenceError(NashBanditError, RuntimeError):
    """An iterative solver hit its iteration cap."""

    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (last residual {residual:.3e})")


class EstimationError(NashBanditError, ValueError):
    """Not enough data for a statistical estimate."""
