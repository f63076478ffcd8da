from .baselines import BestResponse, best_response, best_response_values, k_level_hierarchy
from .exact import (
    SolverSettings,
    counterfactual_q,
    counterfactual_v,
    cross_value,
    get_tree,
    iterate_to_fixed_point,
    obl_hierarchy,
    obl_operator,
    policy_value,
)
from .selfplay import SelfPlayConfig, selfplay_train

__all__ = [
    "BestResponse",
    "SelfPlayConfig",
    "SolverSettings",
    "best_response",
    "best_response_values",
    "counterfactual_q",
    "counterfactual_v",
    "cross_value",
    "get_tree",
    "iterate_to_fixed_point",
    "k_level_hierarchy",
    "obl_hierarchy",
    "obl_operator",
    "policy_value",
    "selfplay_train",
]
