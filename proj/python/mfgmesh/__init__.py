"""Python bindings for the mfgmesh core library."""

from ._core import (
    ConfigError,
    IoError,
    __version__,
    average_discounted_return,
    build_radius_agent_graph,
    compute_reward,
    diameter,
    estimate_visibility,
    finalize_estimate_general,
    finalize_estimate_visibility,
    format_config,
    hidden_width_for,
    load_config,
    munchausen_target,
    parse_config,
    policy_from_q,
    raw_reward_bounds,
    run_training,
    run_trials,
)

__all__ = [
    "ConfigError",
    "IoError",
    "__version__",
    "average_discounted_return",
    "build_radius_agent_graph",
    "compute_reward",
    "diameter",
    "estimate_visibility",
    "finalize_estimate_general",
    "finalize_estimate_visibility",
    "format_config",
    "hidden_width_for",
    "load_config",
    "munchausen_target",
    "parse_config",
    "policy_from_q",
    "raw_reward_bounds",
    "run_training",
    "run_trials",
]
