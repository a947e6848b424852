"""End-to-end run: simulate, detect, island and report."""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from simple_parsing import field

from ..pipeline import RunConfig, emit_report, run_pipeline
from .ingredients import CaseOptions, OutputOptions, SolverOptions, check_optimal

logger = logging.getLogger(__name__)


@dataclass
class Run:
    """Play a scenario through event-triggered detection and adaptive islanding."""

    grid: CaseOptions

    solver: SolverOptions

    output: OutputOptions

    model: Path = field(alias=["-m"])
    """Directory of a model bundle written by `train`."""

    confidence: float = field(default=0.99, choices=[0.95, 0.99])
    """Confidence level of the residual threshold."""

    window: int = 100
    """Samples in the sliding window of the threshold estimate."""

    rounds: Optional[int] = None
    """Voting rounds NR. Defaults to the value stored with the model."""

    persistence_s: float = field(default=0.5, alias=["--persistence-s"])
    """Window after a sectionalization in which alarms count towards re-islanding."""

    persistence_alarms: int = 3
    """Alarms from the unhealthy island that trigger the next islanding step."""

    max_steps: int = 2
    """Cap on islanding steps per run."""

    seed: Optional[int] = None
    """Overrides the noise seed of the scenario."""

    def execute(self):
        """Run the pipeline and write the report, also when a stage failed."""
        config = RunConfig(
            case=self.grid.case,
            scenario=self.grid.scenario,
            model=self.model,
            lambdas=self.solver.weights,
            psi=self.solver.psi,
            confidence=self.confidence,
            window=self.window,
            rounds=self.rounds,
            persistence_s=self.persistence_s,
            persistence_alarms=self.persistence_alarms,
            time_limit_s=self.solver.time_limit_s,
            overload_fraction=self.solver.overload_fraction,
            seed=self.seed,
            max_steps=self.max_steps,
        )
        report = run_pipeline(config, progress=self.solver.progress)
        emit_report(report, self.output.out, self.output.formats, self.output.plot)

        if report.failure is not None:
            raise report.failure
        check_optimal([(f"Islanding step {s.k}", s.solution) for s in report.steps])
