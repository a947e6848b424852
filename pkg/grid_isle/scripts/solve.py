"""Solve the islanding problem for given anomalous buses."""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from simple_parsing import field

from ..dispatch.economic import pre_event_flows
from ..errors import ConfigError
from ..grid.partition import cut_corridors, partition_capacities
from ..grid.topology import BusId, GridTopology
from ..opt.bnb import solve
from ..opt.milp import build_milp, dump_lp
from ..opt.solution import is_feasible, island_reports, validate_solution
from ..utils import write_json
from .ingredients import CaseOptions, SolverOptions, check_optimal

logger = logging.getLogger(__name__)


def restrict(topology: GridTopology, buses: Optional[list[BusId]]) -> GridTopology:
    """Sub-topology over `buses`, or the whole case when None."""
    if not buses:
        return topology
    try:
        return topology.subtopology(buses)
    except ValueError as e:
        raise ConfigError(str(e)) from e


@dataclass
class Solve:
    """Compute the healthy/unhealthy split of a case without running detection."""

    grid: CaseOptions

    solver: SolverOptions

    anomalous: list[int] = field(nargs="+")
    """Buses anchored to the unhealthy side."""

    buses: Optional[list[int]] = field(default=None, nargs="+")
    """Restrict the case to these buses, e.g. the unhealthy island of a step."""

    uncertain: Optional[list[str]] = field(default=None, nargs="+")
    """Corridors such as `1-2` that must open when they touch the healthy side.
    Defaults to the flags of the case."""

    out: Path = field(default=Path("grid-isle-out"), alias=["-o"])
    """Directory to write the solution, the LP listing and the islands to."""

    seed: int = 42
    """Recorded with the solution."""

    def execute(self):
        """Build, solve, check and export the islanding problem."""
        case = self.grid.load_case()
        topology = restrict(case, self.buses)
        try:
            uncertain = None
            if self.uncertain is not None:
                uncertain = [ln.id for ln in topology.lines_by_corridor(self.uncertain)]
            instance = build_milp(
                topology,
                self.anomalous,
                lambdas=self.solver.weights,
                psi=self.solver.psi,
                uncertain=uncertain,
                overload_fraction=self.solver.overload_fraction,
                flows=pre_event_flows(case),
            )
        except ValueError as e:
            raise ConfigError(str(e)) from e

        solution = solve(instance, self.solver.solve_options(self.seed))
        violations = validate_solution(instance, solution)
        if not is_feasible(violations):
            logger.warning(f"Constraint violations above tolerance: {violations}")

        part = solution.partition
        reports = island_reports(solution, instance.topology)
        cut = sorted(cut_corridors(instance.topology, part))
        logger.info(f"Unhealthy {sorted(part.unhealthy)}, cut set {cut}")

        self.out.mkdir(parents=True, exist_ok=True)
        write_json(self.out / "solution.json", solution.to_dict())
        (self.out / "instance.lp").write_text(dump_lp(instance))
        write_json(
            self.out / "islands.json",
            dict(
                healthy=sorted(part.healthy),
                unhealthy=sorted(part.unhealthy),
                cut=cut,
                capacities={
                    side: cap.to_dict()
                    for side, cap in partition_capacities(
                        instance.topology, part
                    ).items()
                },
                islands=[r.to_dict() for r in reports],
                violations=violations,
                solver=solution.stats.to_dict(),
            ),
        )
        check_optimal([("Islanding", solution)])
