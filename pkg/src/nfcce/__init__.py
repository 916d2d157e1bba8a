"""Welfare-maximizing coarse correlated equilibria of extensive-form games by
column generation over the sequence form."""

from .colgen import ColumnGeneration, Solution, SolveStats, solve
from .game import ExtensiveFormGame, GameError, Node, load_game, save_game, validate_game
from .seqform import PurePlan, SequenceForm, build_sequence_form

__all__ = [
    "ColumnGeneration",
    "ExtensiveFormGame",
    "GameError",
    "Node",
    "PurePlan",
    "SequenceForm",
    "Solution",
    "SolveStats",
    "build_sequence_form",
    "load_game",
    "save_game",
    "solve",
    "validate_game",
]

__version__ = "0.1.0"
