"""Feature vectors built from windows of measurement frames."""
from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING, Sequence

import numpy as np
from numpy.typing import NDArray

from ..dynamics.model import channel_names
from ..errors import DetectionError

if TYPE_CHECKING:
    from ..dynamics.scenarios import MeasurementFrame


@dataclass(frozen=True)
class FeatureLayout:
    """Feature ordering for K monitored buses and N DGs.

    The vector holds v_pu, delta and f for every bus, then the three-phase
    voltage, current and THD of every DG.
    """

    bus_count: int
    dg_count: int

    def __post_init__(self):
        """Check the counts."""
        if self.bus_count < 1 or self.dg_count < 1:
            raise DetectionError("Feature layout needs K >= 1 and N >= 1")

    @cached_property
    def names(self) -> tuple[str, ...]:
        """Channel name of every feature."""
        return channel_names(self.bus_count, self.dg_count)

    def __len__(self) -> int:
        """Feature vector length 3K + 9N."""
        return 3 * self.bus_count + 9 * self.dg_count


def extract_features(
    frames: Sequence["MeasurementFrame"], layout: FeatureLayout
) -> NDArray[np.float64]:
    """Average a window of frames into the layout's feature order.

    Raises:
        DetectionError: If the window is empty, a channel is missing or a value
            is not finite.
    """
    if not frames:
        raise DetectionError("Cannot extract features from an empty window")

    channels = frames[0].channels
    index = _channel_index(channels, layout)
    ys = np.stack([f.y for f in frames])
    x = ys[:, index].mean(axis=0)
    if not np.all(np.isfinite(x)):
        raise DetectionError(f"Non-finite feature at t={frames[-1].t:.4f}s")
    return x


def _channel_index(channels: tuple[str, ...], layout: FeatureLayout) -> list[int]:
    if channels == layout.names:
        return list(range(len(layout)))

    positions = {name: i for i, name in enumerate(channels)}
    index = []
    for name in layout.names:
        if name not in positions:
            raise DetectionError(f"Missing channel '{name}' in measurement window")
        index.append(positions[name])
    return index


@dataclass(frozen=True)
class Standardizer:
    """Per-feature affine scaling fitted on training data."""

    mean: NDArray[np.float64]
    std: NDArray[np.float64]

    @classmethod
    def fit(cls, x: NDArray[np.float64]) -> "Standardizer":
        """Estimate mean and standard deviation; constant features get unit scale."""
        std = x.std(axis=0)
        return cls(x.mean(axis=0), np.where(std > 1e-12, std, 1.0))

    def __call__(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        """Standardize a vector or a batch of vectors."""
        if x.shape[-1] != len(self.mean):
            raise DetectionError(
                f"Expected {len(self.mean)} features, got {x.shape[-1]}"
            )
        return (x - self.mean) / self.std
