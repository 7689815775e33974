"""Mirror-descent learning with payoff-based feedback in concave games."""

from .dynamics import Schedule, simulate
from .equilibrium import solve
from .experiment import ExperimentConfig, run_experiment
from .games import AuctionGame, CournotGame, QuadraticGame, make_game
from .geometry import Regularizer
from .sets import ActionSet

__version__ = "0.1.0"

__all__ = [
    "ActionSet", "AuctionGame", "CournotGame", "ExperimentConfig", "QuadraticGame", "Regularizer",
    "Schedule", "make_game", "run_experiment", "simulate", "solve",
]
