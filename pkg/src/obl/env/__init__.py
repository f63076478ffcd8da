from .base import (
    Aoh,
    DecPomdp,
    IllegalActionError,
    InvalidConfigError,
    Trajectory,
    aoh_of,
    replay,
    sample_support,
    step,
    step_support,
)
from .config import EnvironmentConfig, build_env, build_turn_based, load_config
from .hanabi import MiniHanabi, mini_hanabi
from .matrix import SimultaneousGame, StageGame, convert_simultaneous, matrix_game
from .random_game import RandomGame, random_game
from .toy import ToyGame
from .tree import BudgetExceededError, GameTree, Node, enumerate_reachable

__all__ = [
    "Aoh",
    "BudgetExceededError",
    "DecPomdp",
    "EnvironmentConfig",
    "GameTree",
    "IllegalActionError",
    "InvalidConfigError",
    "MiniHanabi",
    "Node",
    "RandomGame",
    "SimultaneousGame",
    "StageGame",
    "ToyGame",
    "Trajectory",
    "aoh_of",
    "build_env",
    "build_turn_based",
    "convert_simultaneous",
    "enumerate_reachable",
    "load_config",
    "matrix_game",
    "mini_hanabi",
    "random_game",
    "replay",
    "sample_support",
    "step",
    "step_support",
]
