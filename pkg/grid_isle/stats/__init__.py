"""Residual triggers and passive baselines."""
from .rate_of_change import RateOfChangeThresholds, baseline_trips, rate_of_change
from .skr import (
    AlarmEvent,
    SkrMonitor,
    SkrState,
    check,
    force_alarm,
    residual,
    update_threshold,
)
