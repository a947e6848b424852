"""Event-triggered run: trigger, detection, islanding steps and report emission."""
import logging
import queue
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence, Union

import numpy as np

from .detection.ensemble import EnsembleDetector
from .detection.features import extract_features
from .detection.voting import Decision, decide
from .dispatch.economic import (
    CostComparison,
    IslandReport,
    compare_to_nominal,
    evaluate_island,
    pre_event_flows,
)
from .dynamics.model import synthetic_dg_model
from .dynamics.scenarios import MeasurementFrame, ScenarioFile, run_scenario
from .errors import ConfigError, DetectionError, GridIsleError, StageError
from .grid.partition import cut_corridors
from .grid.topology import BusId, GridTopology, load_case
from .load_artifacts import resolve_case, resolve_scenario
from .opt.bnb import SolveOptions, solve
from .opt.milp import OVERLOAD_FRACTION, MilpInstance, build_milp, dump_lp
from .opt.solution import IslandingSolution, island_reports
from .stats.rate_of_change import baseline_trips
from .stats.skr import AlarmEvent, SkrMonitor, TracePoint, force_alarm
from .utils import flatten_row, write_csv, write_json

logger = logging.getLogger(__name__)

IEEE_1547_LIMIT_S = 2.0


@dataclass
class RunConfig:
    """Everything a run needs besides the trained detector."""

    case: Union[str, Path] = "rts24"
    scenario: Union[str, Path] = "bus4_persistent_attack"
    model: Optional[Path] = None
    lambdas: tuple[float, float, float] = (1.0, 1.0, 1.0)
    psi: Optional[float] = None
    confidence: float = 0.99
    window: int = 100
    rounds: Optional[int] = None
    early_round: int = 3
    persistence_s: float = 0.5
    persistence_alarms: int = 3
    time_limit_s: float = 60.0
    seed: Optional[int] = None
    max_steps: int = 2
    overload_fraction: Optional[float] = OVERLOAD_FRACTION

    def __post_init__(self):
        """Check ranges."""
        if not 0 < self.confidence < 1:
            raise ConfigError(f"Confidence must lie in (0, 1), got {self.confidence}")
        if self.rounds is not None and self.rounds < 1:
            raise ConfigError("rounds must be positive")
        if self.persistence_s <= 0 or self.persistence_alarms < 1:
            raise ConfigError("The persistence window and alarm count must be positive")
        if len(self.lambdas) != 3 or min(self.lambdas) <= 0:
            raise ConfigError(f"lambda needs three positive weights: {self.lambdas}")
        if self.max_steps < 0:
            raise ConfigError("max_steps must be nonnegative")
        if self.overload_fraction is not None and not 0 < self.overload_fraction <= 1:
            raise ConfigError(
                f"overload_fraction must lie in (0, 1], got {self.overload_fraction}"
            )

    def to_dict(self) -> dict:
        """Convert to a dictionary."""
        return asdict(self)


@dataclass
class Session:
    """One voting session spawned by an alarm."""

    alarm: AlarmEvent
    decision: Optional[Decision] = None
    sim_latency_s: float = 0.0
    compute_s: float = 0.0
    interrupted: bool = False

    @property
    def latency_s(self) -> float:
        """Simulated time spent collecting rounds plus the classifier time."""
        return self.sim_latency_s + self.compute_s

    @property
    def decided_at(self) -> float:
        """Simulation time at which the decision is available."""
        return self.alarm.t + self.sim_latency_s

    def to_dict(self) -> dict:
        """Convert to a dictionary."""
        return dict(
            alarm=self.alarm.to_dict(),
            decision=None if self.decision is None else self.decision.to_dict(),
            latency_s=self.latency_s,
            meets_ieee1547=self.latency_s <= IEEE_1547_LIMIT_S,
            interrupted=self.interrupted,
        )


@dataclass
class IslandingStep:
    """One sectionalization: the MILP solution and the resulting islands."""

    k: int
    t: float
    anomalous: list[BusId]
    buses: list[BusId]
    solution: IslandingSolution
    reports: list[IslandReport]
    comparison: CostComparison
    instance: MilpInstance = field(repr=False)

    @property
    def unhealthy(self) -> frozenset[BusId]:
        """Buses left on the unhealthy side."""
        return self.solution.partition.unhealthy

    @property
    def cut(self) -> list[str]:
        """Corridors joining the two sides."""
        return sorted(
            cut_corridors(self.instance.topology, self.solution.partition)
        )

    def to_dict(self) -> dict:
        """Convert to a dictionary."""
        part = self.solution.partition
        return dict(
            k=self.k,
            t=self.t,
            anomalous=self.anomalous,
            buses=self.buses,
            healthy=sorted(part.healthy),
            unhealthy=sorted(part.unhealthy),
            cut=self.cut,
            objective=self.solution.objective,
            solver=self.solution.stats.to_dict(),
            islands=[r.to_dict() for r in self.reports],
            cost=self.comparison.to_dict(),
        )


@dataclass
class RunReport:
    """Timeline and results of one run."""

    case: str
    scenario: str
    alarms: list[AlarmEvent] = field(default_factory=list)
    sessions: list[Session] = field(default_factory=list)
    steps: list[IslandingStep] = field(default_factory=list)
    nominal: Optional[IslandReport] = None
    classifier_invocations: int = 0
    round_ms: list[float] = field(default_factory=list, repr=False)
    baselines: dict[str, Optional[float]] = field(default_factory=dict)
    trace: list[TracePoint] = field(default_factory=list, repr=False)
    errors: list[str] = field(default_factory=list)
    failure: Optional[GridIsleError] = field(default=None, repr=False)
    wall_time_s: float = 0.0
    config: dict = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        """Whether every stage finished and every step is proven optimal."""
        return not self.errors and all(
            s.solution.stats.status == "optimal" for s in self.steps
        )

    def operating_cost_usd(self) -> Optional[float]:
        """Operating cost of the islands in service after the last step."""
        if not self.steps:
            return None
        islands = {r.island_id: r for s in self.steps for r in s.reports}
        # A step replaces the unhealthy island of the step before it
        for s in self.steps[1:]:
            prev = self.steps[s.k - 2]
            for r in prev.reports:
                if r.healthy is False:
                    islands.pop(r.island_id, None)
        return sum(r.operating_cost_usd for r in islands.values())

    def to_dict(self) -> dict:
        """Convert to a dictionary."""
        decided = [s for s in self.sessions if s.decision is not None]
        return dict(
            case=self.case,
            scenario=self.scenario,
            complete=self.complete,
            errors=list(self.errors),
            alarm_count=len(self.alarms),
            first_alarm_t=self.alarms[0].t if self.alarms else None,
            sessions=[s.to_dict() for s in self.sessions],
            islanding_decisions=sum(s.decision.islanding for s in decided),
            classifier_invocations=self.classifier_invocations,
            mean_round_ms=float(np.mean(self.round_ms)) if self.round_ms else None,
            max_latency_s=max((s.latency_s for s in decided), default=None),
            nominal=None if self.nominal is None else self.nominal.to_dict(),
            steps=[s.to_dict() for s in self.steps],
            operating_cost_usd=self.operating_cost_usd(),
            baselines=dict(self.baselines),
            wall_time_s=self.wall_time_s,
            config=dict(self.config),
        )


@dataclass
class _Message:
    kind: str
    payload: Any = None


def _detection_stage(
    frames: Sequence[MeasurementFrame],
    monitor: SkrMonitor,
    detector: EnsembleDetector,
    scenario: ScenarioFile,
    rounds: int,
    classifiers: int,
    early_round: int,
    feature_window: int,
    channel: queue.Queue,
):
    """Run the trigger over the stream and classify after every alarm."""
    forced = sorted(scenario.forced_alarms, key=lambda a: a.t)
    cache: dict[int, tuple[int, ...]] = {}
    layout = detector.layout
    dt = scenario.dt_s
    t = None

    def votes_at(i: int) -> tuple[int, ...]:
        if i not in cache:
            chunk = frames[max(0, i - feature_window + 1) : i + 1]
            cache[i] = tuple(detector.classify_round(extract_features(chunk, layout)))
        return cache[i]

    def vote_stream(i: int):
        for k in range(i, len(frames)):
            yield votes_at(k)

    try:
        for i, frame in enumerate(frames):
            t = frame.t
            alarms = monitor.observe(frame.t, frame.y, frame.x_est)
            while forced and frame.t >= forced[0].t - 1e-9:
                spec = forced.pop(0)
                alarms.append(force_alarm(spec.t, spec.source))

            for alarm in alarms:
                channel.put(_Message("alarm", alarm))
                session = Session(alarm)
                start = time.perf_counter()
                try:
                    decision = decide(vote_stream(i), rounds, classifiers, early_round)
                except DetectionError as e:
                    logger.warning(f"Session at t={alarm.t:.4f}s interrupted: {e}")
                    session.interrupted = True
                else:
                    session.decision = decision
                    session.sim_latency_s = (decision.rounds_used - 1) * dt
                session.compute_s = time.perf_counter() - start
                channel.put(_Message("decision", session))
    except Exception as e:
        channel.put(_Message("error", StageError("detection", t, e)))
    finally:
        channel.put(_Message("end"))


class _IslandingStage:
    """Consumes alarms and decisions; solves and evaluates islanding steps."""

    def __init__(
        self,
        topology: GridTopology,
        scenario: ScenarioFile,
        config: RunConfig,
        report: RunReport,
    ):
        self.topology = topology
        self.scenario = scenario
        self.config = config
        self.report = report
        self.recent: list[float] = []
        self.flows = pre_event_flows(topology)

    def bus_of(self, alarm: AlarmEvent) -> BusId:
        return self.scenario.dg_buses[alarm.source]

    def run(self, channel: queue.Queue):
        while True:
            msg = channel.get()
            if msg.kind == "end":
                return
            if msg.kind == "error":
                self.fail(msg.payload)
                continue
            if self.report.failure is not None:
                # Drain the channel without acting once a step has failed
                continue
            alarm = msg.payload if msg.kind == "alarm" else msg.payload.alarm
            try:
                if msg.kind == "alarm":
                    self.on_alarm(msg.payload)
                else:
                    self.on_decision(msg.payload)
            except GridIsleError as e:
                self.fail(StageError("islanding", alarm.t, e))

    def fail(self, error: StageError):
        logger.error(str(error))
        self.report.errors.append(str(error))
        if self.report.failure is None:
            self.report.failure = error

    def on_alarm(self, alarm: AlarmEvent):
        self.report.alarms.append(alarm)
        steps = self.report.steps
        if alarm.forced or not steps or len(steps) >= self.config.max_steps:
            return
        last = steps[-1]
        if self.bus_of(alarm) not in last.unhealthy or alarm.t <= last.t:
            return

        p = self.config.persistence_s
        self.recent = [s for s in self.recent if s > alarm.t - p] + [alarm.t]
        if alarm.t > last.t + p and len(self.recent) >= self.config.persistence_alarms:
            logger.info(
                f"Contingency persists at t={alarm.t:.3f}s "
                f"({len(self.recent)} alarms in {p}s); re-islanding"
            )
            self.recent = []
            self.islanding_step(alarm, last)

    def on_decision(self, session: Session):
        self.report.sessions.append(session)
        decision = session.decision
        if decision is None or not decision.islanding or self.report.steps:
            return
        if self.config.max_steps < 1:
            return
        logger.info(
            f"Islanding decided at t={session.decided_at:.3f}s "
            f"(credibility {decision.credibility:.2f}, {decision.rounds_used} rounds)"
        )
        self.islanding_step(session.alarm, None, t=session.decided_at)

    def islanding_step(
        self,
        alarm: AlarmEvent,
        previous: Optional[IslandingStep],
        t: Optional[float] = None,
    ):
        k = len(self.report.steps) + 1
        anomalous = {self.bus_of(alarm)}
        if previous is None:
            topology, uncertain = self.topology, None
            parent_cost: Union[IslandReport, float] = self.report.nominal
            side_ids = ("1", "2")
        else:
            topology = self.topology.subtopology(
                previous.unhealthy, name=f"{self.topology.name} step {k}"
            )
            uncertain = None
            if self.scenario.reislanding_uncertain is not None:
                inside = {ln.id for ln in topology.lines}
                uncertain = [
                    ln.id
                    for ln in self.topology.lines_by_corridor(
                        self.scenario.reislanding_uncertain
                    )
                    if ln.id in inside
                ]
            parent_cost = next(r for r in previous.reports if r.healthy is False)
            side_ids = (f"{k}b", f"{k}a")

        instance = build_milp(
            topology,
            anomalous,
            lambdas=self.config.lambdas,
            psi=self.config.psi,
            uncertain=uncertain,
            overload_fraction=self.config.overload_fraction,
            flows=self.flows,
        )
        options = SolveOptions(self.config.time_limit_s)
        if self.config.seed is not None:
            options.seed = self.config.seed
        solution = solve(instance, options)
        reports = island_reports(solution, instance.topology, side_ids=side_ids)
        step = IslandingStep(
            k=k,
            t=alarm.t if t is None else t,
            anomalous=sorted(anomalous),
            buses=topology.bus_ids,
            solution=solution,
            reports=reports,
            comparison=compare_to_nominal(parent_cost, reports),
            instance=instance,
        )
        self.report.steps.append(step)
        logger.info(
            f"Step {k}: unhealthy {sorted(step.unhealthy)}, "
            f"cost {step.comparison.pre_usd:.2f} -> {step.comparison.post_usd:.2f}"
        )


def _first_trips(
    frames: Sequence[MeasurementFrame], bus_count: int, dg_count: int, dt: float
) -> dict[str, Optional[float]]:
    """Time of the first trip of every passive detector over all DGs."""
    times: dict[str, list[float]] = {}
    for dg in range(dg_count):
        for name, trips in baseline_trips(frames, bus_count, dg, dt).items():
            hit = np.flatnonzero(trips)
            times.setdefault(name, [])
            if len(hit):
                times[name].append(frames[hit[0]].t)
    return {name: min(ts) if ts else None for name, ts in times.items()}


def run_pipeline(
    config: RunConfig,
    detector: Optional[EnsembleDetector] = None,
    topology: Optional[GridTopology] = None,
    scenario: Optional[ScenarioFile] = None,
    progress: bool = False,
) -> RunReport:
    """Simulate a scenario and run detection and islanding as concurrent stages.

    The detection stage feeds alarms and voting decisions into an ordered
    channel; the islanding stage solves step 1 on the first islanding decision
    and re-partitions the unhealthy island when alarms from inside it persist.
    Stage errors are recorded in the report instead of being raised, so a
    partial report can still be written.

    Args:
        config: Run settings.
        detector: A trained detector; loaded from `config.model` when omitted.
        topology: The grid; loaded from `config.case` when omitted.
        scenario: The scenario; loaded from `config.scenario` when omitted.
        progress: Show progress bars.

    Raises:
        ConfigError: If the case, scenario or model cannot be resolved.
    """
    start = time.perf_counter()
    if detector is None:
        if config.model is None:
            raise ConfigError("A trained model bundle is required (--model)")
        detector = EnsembleDetector.load(config.model)
    if topology is None:
        topology = load_case(resolve_case(config.case))
    if scenario is None:
        scenario = ScenarioFile.load(resolve_scenario(config.scenario))
    for bus in scenario.dg_buses:
        if bus not in topology.bus_ids:
            raise ConfigError(f"Scenario places a DG at unknown bus {bus}")

    bundle = detector.config
    if len(scenario.dg_buses) != bundle.dg_count:
        raise ConfigError(
            f"Scenario places {len(scenario.dg_buses)} DGs but the detector was "
            f"trained for {bundle.dg_count}"
        )
    model = synthetic_dg_model(
        dg_count=bundle.dg_count,
        bus_count=bundle.bus_count,
        dt=scenario.dt_s,
        seed=bundle.model_seed,
    )
    seed = scenario.seed if config.seed is None else config.seed
    frames = run_scenario(
        model, scenario.events, scenario.horizon_s, seed, bundle.noise, progress
    )

    report = RunReport(
        case=topology.name,
        scenario=scenario.name,
        config=config.to_dict(),
    )
    report.nominal = evaluate_island(topology, topology.bus_ids, island_id="nominal")
    logger.info(f"Nominal operating cost ${report.nominal.operating_cost_usd:.2f}")

    monitor = SkrMonitor(model, config.confidence, config.window)
    channel: queue.Queue = queue.Queue()
    invocations_before = detector.invocations
    rounds_before = len(detector.round_ms)
    detection = threading.Thread(
        target=_detection_stage,
        name="detection",
        args=(
            frames,
            monitor,
            detector,
            scenario,
            config.rounds or bundle.rounds,
            bundle.classifiers,
            config.early_round,
            bundle.feature_window,
            channel,
        ),
    )
    islanding = threading.Thread(
        target=_IslandingStage(topology, scenario, config, report).run,
        name="islanding",
        args=(channel,),
    )
    detection.start()
    islanding.start()
    detection.join()
    islanding.join()

    report.classifier_invocations = detector.invocations - invocations_before
    report.round_ms = list(detector.round_ms[rounds_before:])
    report.trace = monitor.trace
    report.baselines = _first_trips(
        frames, model.bus_count, model.dg_count, scenario.dt_s
    )
    report.wall_time_s = time.perf_counter() - start
    logger.info(
        f"Run finished: {len(report.alarms)} alarms, {len(report.sessions)} "
        f"sessions, {len(report.steps)} islanding steps, "
        f"{report.classifier_invocations} classifier rounds"
    )
    return report


def emit_report(
    report: RunReport,
    out: Union[str, Path],
    formats: Sequence[str] = ("json",),
    plot: bool = False,
) -> list[Path]:
    """Write the report, per-figure data files and step artifacts to `out`.

    Raises:
        ConfigError: If a format is unknown or the directory is not writable.
    """
    out = Path(out)
    unknown = set(formats) - {"json", "csv"}
    if unknown:
        raise ConfigError(f"Unknown report formats: {sorted(unknown)}")

    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        doc = report.to_dict()
        if "json" in formats:
            write_json(out / "report.json", doc)
            written.append(out / "report.json")
        if "csv" in formats:
            row = flatten_row(doc)
            write_csv(out / "report.csv", list(row), [list(row.values())])
            written.append(out / "report.csv")

        write_csv(
            out / "alarms.csv",
            ["t", "source", "residual", "threshold", "forced"],
            ([a.t, a.source, a.residual, a.threshold, a.forced] for a in report.alarms),
        )
        write_csv(
            out / "residual_trace.csv",
            ["t", "source", "residual", "threshold"],
            ([p.t, p.source, p.residual, p.threshold] for p in report.trace),
        )
        write_csv(
            out / "credibility.csv",
            ["session", "alarm_t", "round", "credibility"],
            (
                [k, s.alarm.t, r, c]
                for k, s in enumerate(report.sessions)
                if s.decision is not None
                for r, c in enumerate(s.decision.credibility_trace(), start=1)
            ),
        )
        written += [out / "alarms.csv", out / "residual_trace.csv"]
        written.append(out / "credibility.csv")

        for step in report.steps:
            path = out / f"solution_step{step.k}.json"
            write_json(path, step.solution.to_dict())
            written.append(path)
            if step.instance is not None:
                path = out / f"instance_step{step.k}.lp"
                path.write_text(dump_lp(step.instance))
                written.append(path)

        if plot:
            from .plotting import credibility_figure, residual_figure

            for name, fig in (
                ("residual.html", residual_figure(report.trace, report.alarms)),
                ("credibility.html", credibility_figure(report.sessions)),
            ):
                fig.write_html(out / name)
                written.append(out / name)
    except OSError as e:
        raise ConfigError(f"Cannot write the report to '{out}': {e}") from e

    logger.info(f"Wrote {len(written)} files to {out}")
    return written
