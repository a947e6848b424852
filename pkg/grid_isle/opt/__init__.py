"""Controlled-islanding MILP: construction, branch and bound, solution checks."""
from .bnb import SolveOptions, relaxed, solve, solve_lp
from .milp import (
    RELAXATION_ORDER,
    MilpInstance,
    build_milp,
    dump_lp,
    generator_window,
)
from .solution import (
    Island,
    IslandingSolution,
    SolverStats,
    is_feasible,
    island_reports,
    islands_of,
    validate_solution,
)
