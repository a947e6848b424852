"""Islanding solutions: export, constraint checks and realized islands."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from ..dispatch.economic import IslandReport, evaluate_island
from ..grid.partition import Partition, connected_components
from ..grid.topology import BusId, GridTopology, Line
from .milp import MilpInstance

logger = logging.getLogger(__name__)

FEAS_TOL = 1e-6


@dataclass
class SolverStats:
    """Branch-and-bound bookkeeping."""

    nodes: int = 0
    gap: float = 0.0
    wall_time_s: float = 0.0
    status: str = "optimal"
    lp_solves: int = 0
    best_bound: float = float("nan")
    node_bounds: list[float] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        """Convert to a dictionary, leaving out the per-node bounds."""
        out = asdict(self)
        out.pop("node_bounds")
        return out


@dataclass
class IslandingSolution:
    """Bus labels, switching decisions and dispatch of one islanding step."""

    h: dict[BusId, int]
    w: dict[str, int]
    phi: dict[str, int]
    p: dict[str, float]
    beta: dict[str, float]
    flow: dict[str, float]
    objective: float
    stats: SolverStats = field(default_factory=SolverStats)
    anomalous: frozenset[BusId] = frozenset()

    @property
    def partition(self) -> Partition:
        """Healthy (h = 1) and unhealthy (h = 0) bus sets."""
        return Partition(
            healthy=frozenset(b for b, v in self.h.items() if v == 1),
            unhealthy=frozenset(b for b, v in self.h.items() if v == 0),
        )

    @property
    def committed(self) -> list[str]:
        """Generators left running."""
        return [g for g, v in self.phi.items() if v == 1]

    @property
    def closed_lines(self) -> list[str]:
        """Lines left in service."""
        return [ln for ln, v in self.w.items() if v == 1]

    def to_dict(self) -> dict:
        """Export with stable keys."""
        return dict(
            h={str(b): v for b, v in self.h.items()},
            w=dict(self.w),
            phi=dict(self.phi),
            p_mw=dict(self.p),
            beta=dict(self.beta),
            flow_mw=dict(self.flow),
            objective=self.objective,
            gap=self.stats.gap,
            nodes=self.stats.nodes,
            status=self.stats.status,
            wall_time_s=self.stats.wall_time_s,
            anomalous=sorted(self.anomalous),
        )

    @classmethod
    def from_dict(cls, doc: dict) -> "IslandingSolution":
        """Inverse of `to_dict`."""
        return cls(
            h={int(b): int(v) for b, v in doc["h"].items()},
            w={k: int(v) for k, v in doc["w"].items()},
            phi={k: int(v) for k, v in doc["phi"].items()},
            p={k: float(v) for k, v in doc["p_mw"].items()},
            beta={k: float(v) for k, v in doc["beta"].items()},
            flow={k: float(v) for k, v in doc["flow_mw"].items()},
            objective=float(doc["objective"]),
            stats=SolverStats(
                nodes=int(doc.get("nodes", 0)),
                gap=float(doc.get("gap", 0.0)),
                wall_time_s=float(doc.get("wall_time_s", 0.0)),
                status=doc.get("status", "optimal"),
            ),
            anomalous=frozenset(int(b) for b in doc.get("anomalous", [])),
        )


def solution_from_vector(
    instance: MilpInstance, x: NDArray[np.float64], stats: Optional[SolverStats] = None
) -> IslandingSolution:
    """Read a full column vector back into named maps."""

    def pick(index: dict, binary: bool = False) -> dict:
        if binary:
            return {k: int(round(x[i])) for k, i in index.items()}
        return {k: float(x[i]) for k, i in index.items()}

    return IslandingSolution(
        h=pick(instance.h_index, True),
        w=pick(instance.w_index, True),
        phi=pick(instance.phi_index, True),
        p=pick(instance.p_index),
        beta=pick(instance.beta_index),
        flow=pick(instance.flow_index),
        objective=instance.objective(x),
        stats=stats or SolverStats(),
        anomalous=instance.anomalous,
    )


def solution_vector(
    instance: MilpInstance, solution: IslandingSolution
) -> NDArray[np.float64]:
    """Column vector of a solution; z is recomputed as beta times h."""
    x = np.zeros(instance.n_vars)
    for b, i in instance.h_index.items():
        x[i] = solution.h[b]
    for ln, i in instance.w_index.items():
        x[i] = solution.w[ln]
    for g, i in instance.phi_index.items():
        x[i] = solution.phi[g]
    for g, i in instance.p_index.items():
        x[i] = solution.p[g]
    for ln, i in instance.flow_index.items():
        x[i] = solution.flow[ln]
    for d, i in instance.beta_index.items():
        x[i] = solution.beta[d]
    loads = {d.id: d for d in instance.topology.loads}
    for d, i in instance.z_index.items():
        x[i] = solution.beta[d] * solution.h[loads[d].bus]
    return x


def validate_solution(
    instance: MilpInstance, solution: IslandingSolution
) -> dict[str, float]:
    """Largest violation of every constraint family; zero means satisfied."""
    x = solution_vector(instance, solution)
    report: dict[str, float] = {}

    slack = instance.a_ub @ x - instance.b_ub
    for family in dict.fromkeys(instance.ub_families):
        rows = [r for r, f in enumerate(instance.ub_families) if f == family]
        report[family] = max(0.0, float(slack[rows].max())) if rows else 0.0

    residual = instance.a_eq @ x - instance.b_eq
    report["power_balance"] = float(np.abs(residual).max()) if len(residual) else 0.0

    # Bounds are reported with the family they belong to
    below = np.maximum(instance.lb - x, 0.0)
    above = np.maximum(x - instance.ub, 0.0)

    def bound_violation(index: dict) -> float:
        cols = list(index.values())
        return float(max(below[cols].max(initial=0.0), above[cols].max(initial=0.0)))

    report["load_service"] = bound_violation(instance.beta_index)
    report["line_limit"] = max(
        report.get("line_limit", 0.0), bound_violation(instance.flow_index)
    )
    report["generator_margin"] = max(
        report.get("generator_margin", 0.0), bound_violation(instance.p_index)
    )
    report["anchoring"] = float(
        max((solution.h[b] for b in instance.anomalous), default=0)
    )
    binaries = [*solution.h.values(), *solution.w.values(), *solution.phi.values()]
    report["integrality"] = float(
        max((min(v, 1 - v) if 0 <= v <= 1 else abs(v) for v in binaries), default=0)
    )
    return report


def is_feasible(report: dict[str, float], tol: float = FEAS_TOL) -> bool:
    """Whether every family of a `validate_solution` report is within `tol`."""
    return all(v <= tol for v in report.values())


@dataclass(frozen=True)
class Island:
    """A connected component of the post-islanding network.

    A component is unhealthy iff it holds an anomalous bus. A component cut
    off on the unhealthy side without one counts as healthy.
    """

    buses: frozenset[BusId]
    healthy: bool
    lines: tuple[Line, ...] = ()


def islands_of(solution: IslandingSolution, topology: GridTopology) -> list[Island]:
    """Connected components over the closed lines, each tagged healthy or not.

    Raises:
        ValueError: If a component joins buses from both sides of the partition.
    """
    closed = [ln for ln in topology.lines if solution.w.get(ln.id, 0) == 1]
    islands = []
    for buses in connected_components(topology.bus_ids, closed):
        labels = {solution.h[b] for b in buses}
        if len(labels) > 1:
            raise ValueError(
                f"Island {sorted(buses)} mixes both sides of the partition"
            )
        islands.append(
            Island(
                buses=buses,
                healthy=not (buses & solution.anomalous),
                lines=tuple(
                    ln for ln in closed if ln.from_bus in buses and ln.to_bus in buses
                ),
            )
        )
    return islands


def side_islands(solution: IslandingSolution) -> list[tuple[frozenset[BusId], bool]]:
    """Nonempty sides as (buses, healthy), healthy side first."""
    part = solution.partition
    sides = [(part.healthy, True), (part.unhealthy, False)]
    return [(buses, healthy) for buses, healthy in sides if buses]


def island_reports(
    solution: IslandingSolution,
    topology: GridTopology,
    side_ids: tuple[str, str] = ("1", "2"),
    by_component: bool = False,
) -> list[IslandReport]:
    """Dispatch every island of a solution concurrently.

    By default the two sides of the partition are reported, the healthy side
    under `side_ids[0]` and the unhealthy side under `side_ids[1]`.
    `by_component` reports each connected component instead, numbered from 1.
    """
    if by_component:
        groups = [
            (str(k), isl.buses, isl.healthy)
            for k, isl in enumerate(islands_of(solution, topology), start=1)
        ]
    else:
        groups = [
            (side_ids[0] if healthy else side_ids[1], buses, healthy)
            for buses, healthy in side_islands(solution)
        ]

    opened = [ln for ln in topology.lines if solution.w.get(ln.id, 0) == 0]

    def evaluate(group: tuple[str, frozenset[BusId], bool]) -> IslandReport:
        label, buses, healthy = group
        cut = {
            ln.corridor for ln in opened if ln.from_bus in buses or ln.to_bus in buses
        }
        return evaluate_island(
            topology,
            buses,
            island_id=label,
            committed=solution.committed,
            lines=solution.closed_lines,
            disconnected=sorted(cut),
            healthy=healthy,
        )

    with ThreadPoolExecutor(max_workers=max(len(groups), 1)) as pool:
        return list(pool.map(evaluate, groups))
