"""Two-board tug-of-war / random-walk game and its dynamic programming principle.

Board 1 plays tug-of-war with time running down by ``eps^2`` per move, board 2
moves uniformly at random at frozen time, and the token switches boards with
probability ``eps^2`` (``K eps^2`` from board 2).  The package solves the
lattice DPP for the value pair ``(u, v)``, simulates the game, and checks the
results against the limit parabolic/elliptic system.
"""

__version__ = "0.1.0"

from .analysis import (
    ConvergenceTable,
    ResidualReport,
    boundary_estimate_suite,
    comparison_check,
    convergence_study,
    kappa,
    pde_residuals,
)
from .data import ProblemData, terminal_payoff
from .dpp import ValuePair, dpp_residual, solve_dpp, solve_slice
from .errors import (
    ConfigurationError,
    ContractViolation,
    ConvergenceError,
    CoverageError,
    FormatError,
    GeometryError,
    NumericError,
    RunawayError,
    StrategyContractError,
    TowGameError,
)
from .game import GameRules, GameState, TrajectoryOutcome, estimate_value, play, step
from .geometry import DomainSpec, SpaceTimeGrid, build_grid, classify_point
from .io_formats import read_field_pack, write_field_pack
from .strategies import DppGreedy, PullToward, RandomStrategy, pull_move

__all__ = [
    "ConfigurationError", "ContractViolation", "ConvergenceError", "ConvergenceTable", "CoverageError",
    "DomainSpec", "DppGreedy", "FormatError", "GameRules", "GameState", "GeometryError", "NumericError",
    "ProblemData", "PullToward", "RandomStrategy", "ResidualReport", "RunawayError", "SpaceTimeGrid",
    "StrategyContractError", "TowGameError", "TrajectoryOutcome", "ValuePair", "boundary_estimate_suite",
    "build_grid", "classify_point", "comparison_check", "convergence_study", "dpp_residual", "estimate_value",
    "kappa", "pde_residuals", "play", "pull_move", "read_field_pack", "solve_dpp", "solve_slice", "step",
    "terminal_payoff", "write_field_pack",
]
