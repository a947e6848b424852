"""Passive rate-of-change islanding detectors used as reference baselines."""
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from ..dynamics.model import dg_channel_slice


@dataclass(frozen=True)
class RateOfChangeThresholds:
    """Trip levels per second of the four passive detectors."""

    rocof_hz: float = 0.5
    rocov_pu: float = 5.0
    rocoap_pu: float = 10.0
    rocorp_pu: float = 10.0


def rate_of_change(series: NDArray[np.float64], dt: float) -> NDArray[np.float64]:
    """Absolute first difference per second; the first sample is zero."""
    series = np.asarray(series, dtype=np.float64)
    out = np.zeros_like(series)
    out[1:] = np.abs(np.diff(series, axis=0)) / dt
    return out


def baseline_signals(frames: Sequence, bus_count: int, dg: int) -> dict[str, NDArray]:
    """Frequency, voltage and power proxies of one DG over a stream.

    Active power is approximated by the summed phase products v*i, reactive
    power by the same products weighted with the angle channel.
    """
    ys = np.stack([f.y for f in frames])
    rows = dg_channel_slice(bus_count, dg)
    v, i = ys[:, rows.start : rows.start + 3], ys[:, rows.start + 3 : rows.start + 6]
    bus = dg % bus_count
    delta = ys[:, bus_count + bus]
    p = (v * i).sum(axis=1)
    return dict(
        f=ys[:, 2 * bus_count + bus],
        v=v.mean(axis=1),
        p=p,
        q=p * np.sin(delta),
    )


def baseline_trips(
    frames: Sequence,
    bus_count: int,
    dg: int,
    dt: float,
    thresholds: RateOfChangeThresholds = RateOfChangeThresholds(),
) -> dict[str, NDArray[np.bool_]]:
    """Per-sample trip flags of ROCOF, ROCOV, ROCOAP and ROCORP for one DG."""
    sig = baseline_signals(frames, bus_count, dg)
    return dict(
        rocof=rate_of_change(sig["f"], dt) > thresholds.rocof_hz,
        rocov=rate_of_change(sig["v"], dt) > thresholds.rocov_pu,
        rocoap=rate_of_change(sig["p"], dt) > thresholds.rocoap_pu,
        rocorp=rate_of_change(sig["q"], dt) > thresholds.rocorp_pu,
    )
