"""Maximum-principle toolkit for partially observed jump-diffusion control."""

from ._core import (
    ConfigError,
    ConvergenceError,
    LqParams,
    SpecError,
    estimate_cost,
    exact_cost,
    optimize,
    run_command,
    set_thread_count,
    simulate,
)

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "LqParams",
    "SpecError",
    "estimate_cost",
    "exact_cost",
    "optimize",
    "run_command",
    "set_thread_count",
    "simulate",
]
