from .bnb import MilpSolution, SolverConfig, most_fractional, solve_milp
from .plugins import (
    ExternalSolverError,
    UnknownPluginError,
    available_plugins,
    command_adapter,
    register_plugin,
    solve_via_plugin,
    unregister_plugin,
)
from .simplex import LpSolution, solve_lp

__all__ = [
    "ExternalSolverError",
    "LpSolution",
    "MilpSolution",
    "SolverConfig",
    "UnknownPluginError",
    "available_plugins",
    "command_adapter",
    "most_fractional",
    "register_plugin",
    "solve_lp",
    "solve_milp",
    "solve_via_plugin",
    "unregister_plugin",
]
