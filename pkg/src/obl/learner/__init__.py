from .replay import EmptyBufferError, ReplayBuffer, ReplayEntry
from .train import (
    FictitiousConsistencyError,
    LearnerConfig,
    TrainResult,
    fictitious_target,
    lb_obl_train,
    q_obl_train,
    simulate_target,
)

__all__ = [
    "EmptyBufferError",
    "FictitiousConsistencyError",
    "LearnerConfig",
    "ReplayBuffer",
    "ReplayEntry",
    "TrainResult",
    "fictitious_target",
    "lb_obl_train",
    "q_obl_train",
    "simulate_target",
]
