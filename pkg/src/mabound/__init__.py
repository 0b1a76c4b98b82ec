"""Bounds on time-bounded reachability in Markov automata via menu-based game
abstraction and scheduler-driven refinement."""

from .abstraction import AbstractGame, Partition, build_game, initial_partition
from .analysis import Bound, Objective, solve
from .driver import CheckRequest, CheckResult, Mode, Status, check, check_concrete
from .model import MarkovAutomaton, StateClass
from .modelio import ModelDocument, parse_model, serialize_model

__all__ = [
    "AbstractGame", "Bound", "CheckRequest", "CheckResult", "MarkovAutomaton", "Mode",
    "ModelDocument", "Objective", "Partition", "StateClass", "Status", "build_game", "check",
    "check_concrete", "initial_partition", "parse_model", "serialize_model", "solve",
]
