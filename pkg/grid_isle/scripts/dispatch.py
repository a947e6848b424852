"""Economic dispatch of a case or of the islands of a saved solution."""
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from simple_parsing import field

from ..dispatch.economic import compare_to_nominal, evaluate_island
from ..errors import ConfigError
from ..opt.solution import IslandingSolution, island_reports
from ..utils import write_json
from .ingredients import CaseOptions

logger = logging.getLogger(__name__)


@dataclass
class Dispatch:
    """Evaluate generation cost and load shedding without solving for a split."""

    grid: CaseOptions

    solution: Optional[Path] = field(default=None, alias=["-s"])
    """A `solution.json` written by `solve` or `run`. Without it the whole case
    is dispatched."""

    by_component: bool = field(action="store_true")
    """Report every connected component instead of the two sides."""

    out: Path = field(default=Path("grid-isle-out"), alias=["-o"])
    """Directory to write `dispatch.json` to."""

    def load_solution(self) -> IslandingSolution:
        """Read the solution file."""
        assert self.solution is not None
        try:
            with open(self.solution) as f:
                return IslandingSolution.from_dict(json.load(f))
        except (OSError, json.JSONDecodeError, KeyError) as e:
            raise ConfigError(f"Cannot read solution '{self.solution}': {e}") from e

    def execute(self):
        """Dispatch before and, given a solution, after islanding."""
        topology = self.grid.load_case()
        if self.solution is None:
            nominal = evaluate_island(topology, topology.bus_ids, island_id="nominal")
            logger.info(f"Nominal operating cost ${nominal.operating_cost_usd:.2f}")
            write_json(self.out / "dispatch.json", dict(nominal=nominal.to_dict()))
            return

        solution = self.load_solution()
        buses = set(solution.h)
        if buses != set(topology.bus_ids):
            try:
                topology = topology.subtopology(buses)
            except ValueError as e:
                raise ConfigError(f"Solution does not fit the case: {e}") from e

        pre = evaluate_island(topology, topology.bus_ids, island_id="pre")
        reports = island_reports(solution, topology, by_component=self.by_component)
        comparison = compare_to_nominal(pre, reports)
        for r in reports:
            logger.info(
                f"Island {r.island_id}: {len(r.buses)} buses, "
                f"${r.operating_cost_usd:.2f}, shed {100 * r.shed_fraction:.1f}%"
            )
        logger.info(
            f"Operating cost ${comparison.pre_usd:.2f} -> ${comparison.post_usd:.2f} "
            f"({comparison.percent:+.1f}%)"
        )
        write_json(
            self.out / "dispatch.json",
            dict(
                pre=pre.to_dict(),
                islands=[r.to_dict() for r in reports],
                comparison=comparison.to_dict(),
            ),
        )
