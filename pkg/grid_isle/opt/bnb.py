"""Best-bound branch and bound over the islanding MILP."""
import heapq
import logging
import time
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import linprog
from tqdm.auto import tqdm

from ..errors import InfeasibleError, SolverTimeoutError
from .milp import RELAXATION_ORDER, RELAXED_ROWS, MilpInstance
from .solution import IslandingSolution, SolverStats, solution_from_vector

logger = logging.getLogger(__name__)


@dataclass
class SolveOptions:
    """Limits of the search."""

    time_limit_s: float = 60.0
    """Wall-clock budget; the best incumbent is returned when it runs out."""

    gap: float = 1e-9
    """Relative optimality gap at which a node is pruned."""

    seed: int = 42
    """Recorded with the run. Node selection and branching are deterministic."""

    int_tol: float = 1e-6
    """Distance from 0 or 1 below which a binary counts as integral."""

    max_nodes: Optional[int] = None
    """Optional cap on explored nodes."""

    progress: bool = False
    """Show a progress bar over explored nodes."""


LpResult = tuple[NDArray[np.float64], float]


def solve_lp(
    instance: MilpInstance,
    lb: Optional[NDArray[np.float64]] = None,
    ub: Optional[NDArray[np.float64]] = None,
) -> Optional[LpResult]:
    """LP relaxation under the given column bounds; None if infeasible."""
    lb = instance.lb if lb is None else lb
    ub = instance.ub if ub is None else ub
    has_rows = instance.a_ub.shape[0] > 0
    res = linprog(
        -instance.c,
        A_ub=instance.a_ub if has_rows else None,
        b_ub=instance.b_ub if has_rows else None,
        A_eq=instance.a_eq,
        b_eq=instance.b_eq,
        bounds=np.column_stack([lb, ub]),
        method="highs-ds",
    )
    if res.status == 2:
        return None
    if res.status != 0:
        logger.warning(f"LP relaxation failed ({res.message}); treating as infeasible")
        return None
    return res.x, float(-res.fun + instance.constant)


def relaxed(instance: MilpInstance, family: str) -> MilpInstance:
    """Copy of the instance with one constraint family lifted."""
    if family == "critical_floor":
        lb = instance.lb.copy()
        lb[list(instance.beta_index.values())] = 0.0
        return replace(instance, lb=lb)

    dropped = RELAXED_ROWS[family]
    keep = np.array(
        [r for r, f in enumerate(instance.ub_families) if f not in dropped],
        dtype=np.int64,
    )
    return replace(
        instance,
        a_ub=instance.a_ub[keep],
        b_ub=instance.b_ub[keep],
        ub_names=[instance.ub_names[r] for r in keep],
        ub_families=[instance.ub_families[r] for r in keep],
    )


class _Search:
    """State of one branch-and-bound run."""

    def __init__(self, instance: MilpInstance, options: SolveOptions):
        self.instance = instance
        self.options = options
        self.stats = SolverStats()
        self.incumbent: Optional[LpResult] = None
        self.tried: set[bytes] = set()
        self.n_bin = instance.n_binaries
        self.phi_cols = np.array(list(instance.phi_index.values()), dtype=np.int64)

    def lp(self, lb, ub) -> Optional[LpResult]:
        self.stats.lp_solves += 1
        return solve_lp(self.instance, lb, ub)

    def tolerance(self) -> float:
        inc = self.incumbent[1]
        return self.options.gap * max(1.0, abs(inc))

    def prunable(self, bound: float) -> bool:
        if self.incumbent is None:
            return False
        return bound <= self.incumbent[1] + self.tolerance()

    def fixed(self, binaries: NDArray[np.float64]) -> Optional[LpResult]:
        """Re-solve the continuous part with every binary fixed."""
        key = np.round(binaries).astype(np.int8).tobytes()
        if key in self.tried:
            return None
        self.tried.add(key)
        lb, ub = self.instance.lb.copy(), self.instance.ub.copy()
        lb[: self.n_bin] = ub[: self.n_bin] = np.round(binaries)
        return self.lp(lb, ub)

    def canonical(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        """Integral binaries with every allowed line closed."""
        binaries = np.round(x[: self.n_bin])
        h = {b: binaries[i] for b, i in self.instance.h_index.items()}
        allowed = self.instance.allowed_lines(h)
        for ln, i in self.instance.w_index.items():
            if allowed[ln] and ln in self.instance.uncertain:
                binaries[i] = 1.0
        return binaries

    def offer(self, result: LpResult):
        """Polish an integral point and keep it if it improves the incumbent."""
        x, obj = result
        polished = self.fixed(self.canonical(x))
        if polished is not None and polished[1] >= obj - 1e-9:
            x, obj = polished
        if self.incumbent is None or obj > self.incumbent[1] + 1e-9:
            self.incumbent = (x, obj)
            logger.debug(
                f"New incumbent J={obj:.6f} after {self.stats.nodes} nodes"
            )

    def round_heuristic(self, x: NDArray[np.float64]):
        """Round the bus labels, close every allowed line, round commitments."""
        binaries = np.round(x[: self.n_bin])
        for b in self.instance.anomalous:
            binaries[self.instance.h_index[b]] = 0.0
        h = {b: binaries[i] for b, i in self.instance.h_index.items()}
        allowed = self.instance.allowed_lines(h)
        for ln, i in self.instance.w_index.items():
            binaries[i] = 1.0 if allowed[ln] else 0.0
        binaries[self.phi_cols] = (x[self.phi_cols] >= 0.5).astype(np.float64)
        result = self.fixed(binaries)
        if result is not None:
            self.offer(result)

    def branch_column(self, x: NDArray[np.float64]) -> Optional[int]:
        """Most fractional binary; ties go to the lowest column."""
        dist = np.abs(x[: self.n_bin] - np.round(x[: self.n_bin]))
        if dist.size == 0 or dist.max() <= self.options.int_tol:
            return None
        return int(np.flatnonzero(dist >= dist.max() - 1e-12)[0])

    def run(self, root: LpResult) -> str:
        start = time.perf_counter()
        seq = 0
        heap = [(-root[1], -seq, self.instance.lb, self.instance.ub, root[0])]
        status = "optimal"
        pbar = tqdm(desc="Branch and bound", disable=not self.options.progress)

        while heap:
            if time.perf_counter() - start > self.options.time_limit_s:
                status = "time_limit"
                break
            if self.options.max_nodes and self.stats.nodes >= self.options.max_nodes:
                status = "node_limit"
                break

            neg_bound, _, lb, ub, x = heapq.heappop(heap)
            bound = -neg_bound
            if self.prunable(bound):
                # Best-first: every open node is bounded by this one
                heap.clear()
                break
            self.stats.nodes += 1
            self.stats.node_bounds.append(bound)
            pbar.update()

            col = self.branch_column(x)
            if col is None:
                self.offer((x, bound))
                continue
            self.round_heuristic(x)

            for value in (0.0, 1.0):
                child_lb, child_ub = lb.copy(), ub.copy()
                child_lb[col] = child_ub[col] = value
                if not lb[col] <= value <= ub[col]:
                    continue
                result = self.lp(child_lb, child_ub)
                if result is None or self.prunable(result[1]):
                    continue
                seq += 1
                heapq.heappush(
                    heap, (-result[1], -seq, child_lb, child_ub, result[0])
                )

        pbar.close()
        open_bounds = [-item[0] for item in heap]
        if status == "optimal" or not open_bounds:
            self.stats.best_bound = (
                self.incumbent[1] if self.incumbent is not None else float("-inf")
            )
        else:
            self.stats.best_bound = max(open_bounds)
        return status


def _diagnose(
    instance: MilpInstance, options: SolveOptions, integer: bool
) -> InfeasibleError:
    """Name the first constraint family whose relaxation restores feasibility."""
    for family in RELAXATION_ORDER:
        candidate = relaxed(instance, family)
        root = solve_lp(candidate)
        if root is None:
            continue
        if integer:
            search = _Search(candidate, replace(options, progress=False))
            search.round_heuristic(root[0])
            search.run(root)
            if search.incumbent is None:
                continue
        logger.debug(f"Relaxing '{family}' restores feasibility")
        return InfeasibleError(
            family,
            f"Islanding problem is infeasible; relaxing the {family} constraints "
            f"restores feasibility",
        )
    return InfeasibleError(
        None, "Islanding problem is infeasible under every single-family relaxation"
    )


def solve(
    instance: MilpInstance, options: Optional[SolveOptions] = None
) -> IslandingSolution:
    """Maximize the islanding objective by branch and bound.

    Nodes are explored best bound first, with the most recently created node
    winning ties. Every node solves its LP relaxation with the HiGHS dual
    simplex; children are solved when created so that their bounds order the
    queue. A rounding heuristic seeds incumbents, and every incumbent is
    re-solved with its binaries fixed so that the continuous values are
    consistent. Instability-prone lines inside the unhealthy side are reported
    closed, which leaves the objective unchanged.

    Args:
        instance: The problem from `build_milp`.
        options: Search limits.

    Returns:
        The optimal solution, or the best incumbent with its gap when a limit
        stops the search.

    Raises:
        InfeasibleError: If no assignment satisfies the constraints. The error
            names the first family whose relaxation restores feasibility.
        SolverTimeoutError: If a limit stops the search before any incumbent.
    """
    options = options or SolveOptions()
    start = time.perf_counter()

    root = solve_lp(instance)
    if root is None:
        raise _diagnose(instance, options, integer=False)

    search = _Search(instance, options)
    search.stats.lp_solves = 1
    search.round_heuristic(root[0])
    status = search.run(root)
    stats = search.stats
    stats.wall_time_s = time.perf_counter() - start
    stats.status = status

    if search.incumbent is None:
        if status != "optimal":
            raise SolverTimeoutError(
                f"Search stopped ({status}) after {stats.nodes} nodes without a "
                f"feasible assignment"
            )
        raise _diagnose(instance, options, integer=True)

    x, obj = search.incumbent
    stats.gap = max(0.0, (stats.best_bound - obj) / max(1.0, abs(obj)))
    if status == "optimal":
        stats.gap = 0.0
    else:
        logger.warning(
            f"Stopped at the {status} with incumbent J={obj:.4f}, gap {stats.gap:.2e}"
        )
    logger.info(
        f"Solved islanding MILP: J={obj:.4f}, {stats.nodes} nodes, "
        f"{stats.lp_solves} LPs, {stats.wall_time_s:.2f}s"
    )
    return solution_from_vector(instance, x, stats)
