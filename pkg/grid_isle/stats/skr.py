"""Residual trigger with dynamic chi-square thresholds."""
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.stats import chi2

from ..dynamics.model import DgModel, dg_channel_slice

logger = logging.getLogger(__name__)

# Consistency constant turning a median absolute value into a Gaussian sigma
MAD_TO_SIGMA = 1.4826


@dataclass(frozen=True)
class AlarmEvent:
    """A residual crossing of the threshold, or a forced alarm."""

    t: float
    residual: float
    threshold: float
    source: int
    forced: bool = False

    def to_dict(self) -> dict:
        """Row of the alarm log."""
        return dict(
            t=self.t,
            source=self.source,
            residual=self.residual,
            threshold=self.threshold,
            forced=self.forced,
        )


def residual(
    y: NDArray[np.float64], x_est: NDArray[np.float64], c_mat: NDArray[np.float64]
) -> float:
    """Euclidean norm of `y - C x_est`."""
    if c_mat.shape != (len(y), len(x_est)):
        raise ValueError(
            f"C has shape {c_mat.shape}, expected ({len(y)}, {len(x_est)})"
        )
    return float(np.linalg.norm(y - c_mat @ x_est))


@dataclass
class SkrState:
    """Threshold state of one monitored source.

    The window stores recent residual component vectors; its per-component
    noise scale is the median absolute value scaled to a Gaussian sigma.
    """

    dof: int
    confidence: float = 0.99
    window_size: int = 100
    window: deque = field(init=False)
    xi_t: float = field(default=0.0, init=False)
    last_alarm: Optional[float] = field(default=None, init=False)

    def __post_init__(self):
        """Check the parameters and cache the chi-square quantile."""
        if self.dof < 1:
            raise ValueError("dof must be positive")
        if not 0 < self.confidence < 1:
            raise ValueError(f"Confidence must lie in (0, 1), got {self.confidence}")
        if self.window_size < 2:
            raise ValueError("Window must hold at least two samples")
        self.window = deque(maxlen=self.window_size)
        self._quantile = float(np.sqrt(chi2.ppf(self.confidence, self.dof)))

    @property
    def warmup(self) -> int:
        """Samples needed before alarms are armed."""
        return self.window_size // 2

    @property
    def warmed_up(self) -> bool:
        """Whether alarms are armed."""
        return len(self.window) >= self.warmup and self.xi_t > 0


def update_threshold(state: SkrState, e: NDArray[np.float64]) -> float:
    """Admit residual components `e` to the window and recompute the threshold.

    `e` is one vector sample, not a scalar residual: for a DG it holds the
    nine three-phase channel components, so `dof` is 9 per DG rather than the
    state count, and the threshold bounds the norm of `e`.

    Returns:
        The new threshold `scale * sqrt(chi2.ppf(confidence, dof))`.
    """
    e = np.atleast_1d(np.asarray(e, dtype=np.float64))
    state.window.append(e)
    scale = MAD_TO_SIGMA * float(np.median(np.abs(np.concatenate(state.window))))
    state.xi_t = scale * state._quantile
    return state.xi_t


def check(
    state: SkrState, t: float, r: float, source: int = 0
) -> Optional[AlarmEvent]:
    """Alarm iff warmed up and `r` strictly exceeds the current threshold."""
    if not state.warmed_up or not r > state.xi_t:
        return None
    state.last_alarm = t
    return AlarmEvent(t=t, residual=r, threshold=state.xi_t, source=source)


def force_alarm(t: float, source: int = 0) -> AlarmEvent:
    """Synthetic alarm that enters the detection stage like a real one."""
    return AlarmEvent(t=t, residual=1.0, threshold=0.0, source=source, forced=True)


@dataclass
class TracePoint:
    """One residual sample of one source."""

    t: float
    source: int
    residual: float
    threshold: float


class SkrMonitor:
    """One `SkrState` per DG over the DG's nine three-phase channels.

    Each DG is tested on its own residual vector, so every state has `dof=9`.
    """

    def __init__(
        self,
        model: DgModel,
        confidence: float = 0.99,
        window: int = 100,
        record_trace: bool = True,
    ):
        """Create a monitor for every DG of `model`."""
        self.model = model
        self.slices = [
            dg_channel_slice(model.bus_count, j) for j in range(model.dg_count)
        ]
        self.states = [
            SkrState(dof=9, confidence=confidence, window_size=window)
            for _ in range(model.dg_count)
        ]
        self.record_trace = record_trace
        self.trace: list[TracePoint] = []

    def components(self, y: NDArray[np.float64], x_est: NDArray[np.float64], dg: int):
        """Measured deviation minus model prediction on the channels of `dg`."""
        rows = self.slices[dg]
        return (y[rows] - self.model.y0[rows]) - self.model.c_mat[rows] @ x_est

    def observe(
        self, t: float, y: NDArray[np.float64], x_est: NDArray[np.float64]
    ) -> list[AlarmEvent]:
        """Process one sample; alarmed residuals are kept out of the window."""
        alarms = []
        for dg, state in enumerate(self.states):
            e = self.components(y, x_est, dg)
            r = float(np.linalg.norm(e))
            if self.record_trace:
                self.trace.append(TracePoint(t, dg, r, state.xi_t))
            alarm = check(state, t, r, dg)
            if alarm is None:
                update_threshold(state, e)
            else:
                logger.debug(
                    f"Alarm from DG {dg} at t={t:.4f}s: {r:.4g} > {alarm.threshold:.4g}"
                )
                alarms.append(alarm)
        return alarms

    def run(self, frames: Sequence) -> list[AlarmEvent]:
        """Process a whole stream of measurement frames."""
        alarms = []
        for frame in frames:
            alarms.extend(self.observe(frame.t, frame.y, frame.x_est))
        return alarms
