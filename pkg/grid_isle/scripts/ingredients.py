"""Shared configuration for the scripts."""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from simple_parsing import field

from ..dynamics.scenarios import ScenarioFile
from ..errors import ConfigError, SolverTimeoutError
from ..grid.topology import GridTopology, load_case
from ..load_artifacts import resolve_case, resolve_scenario
from ..opt.bnb import SolveOptions
from ..opt.solution import IslandingSolution

logger = logging.getLogger(__name__)


def parse_lambdas(text: str) -> tuple[float, float, float]:
    """Parse objective weights written as `l1,l2,l3`.

    Raises:
        ConfigError: If there are not exactly three positive numbers.
    """
    try:
        weights = tuple(float(v) for v in text.split(","))
    except ValueError as e:
        raise ConfigError(f"Cannot parse --lambda '{text}': {e}") from e
    if len(weights) != 3 or min(weights) <= 0:
        raise ConfigError(f"--lambda needs three positive weights, got '{text}'")
    return weights  # type: ignore[return-value]


@dataclass
class CaseOptions:
    """Configuration for the grid and the scenario played on it."""

    case: str = "rts24"
    """Path to a case document, or the name of a bundled case."""

    scenario: str = "bus4_persistent_attack"
    """Path to a scenario file, or the name of a bundled scenario."""

    def load_case(self) -> GridTopology:
        """Load and validate the case."""
        topology = load_case(resolve_case(self.case))
        logger.info(
            f"Loaded case '{topology.name}': {len(topology.buses)} buses, "
            f"{len(topology.lines)} lines, {len(topology.generators)} generators"
        )
        return topology

    def load_scenario(self) -> ScenarioFile:
        """Load and validate the scenario."""
        return ScenarioFile.load(resolve_scenario(self.scenario))


@dataclass
class SolverOptions:
    """Configuration for the islanding problem and its branch and bound."""

    lambdas: str = field(default="1,1,1", alias=["--lambda"])
    """Weights of served load, opened lines and decommitted generators."""

    psi: Optional[float] = None
    """Service weight of loads on the unhealthy side. Defaults to the case values."""

    time_limit_s: float = field(default=60.0, alias=["--time-limit-s"])
    """Wall-clock budget of each branch and bound."""

    overload_fraction: float = field(default=0.95, alias=["--overload-fraction"])
    """Lines loaded at or above this fraction of their rating before the event are
    treated as instability-prone and open when they touch the healthy side."""

    progress: bool = field(action="store_true")
    """Show progress bars."""

    @property
    def weights(self) -> tuple[float, float, float]:
        """The parsed objective weights."""
        return parse_lambdas(self.lambdas)

    def solve_options(self, seed: Optional[int] = None) -> SolveOptions:
        """Search limits for one solve."""
        options = SolveOptions(time_limit_s=self.time_limit_s, progress=self.progress)
        if seed is not None:
            options.seed = seed
        return options


@dataclass
class OutputOptions:
    """Configuration for where and how results are written."""

    out: Path = field(default=Path("grid-isle-out"), alias=["-o"])
    """Directory to write the results to."""

    formats: list[str] = field(
        default_factory=lambda: ["json"], alias=["--format"], nargs="+", required=False
    )
    """Report formats, any of `json` and `csv`."""

    plot: bool = field(action="store_true")
    """Also write the residual and credibility figures as HTML."""


def check_optimal(solutions: list[tuple[str, IslandingSolution]]):
    """Raise once results are written if a search stopped before optimality.

    Raises:
        SolverTimeoutError: If any solution is only the best incumbent.
    """
    for label, sol in solutions:
        if sol.stats.status != "optimal":
            raise SolverTimeoutError(
                f"{label} stopped at the {sol.stats.status}; reported the incumbent "
                f"with gap {sol.stats.gap:.2e}"
            )
