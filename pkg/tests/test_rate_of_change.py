import numpy as np

from grid_isle.dynamics.model import DgModel
from grid_isle.dynamics.scenarios import run_scenario
from grid_isle.stats.rate_of_change import (
    RateOfChangeThresholds,
    baseline_trips,
    rate_of_change,
)


def test_rate_of_change():
    out = rate_of_change(np.array([1.0, 1.5, 0.5]), dt=0.5)
    np.testing.assert_allclose(out, [0.0, 1.0, 2.0])


def test_baseline_trips_shapes(small_model: DgModel):
    frames = run_scenario(small_model, None, horizon=0.05, seed=0)
    trips = baseline_trips(frames, small_model.bus_count, 0, dt=1e-3)
    assert set(trips) == {"rocof", "rocov", "rocoap", "rocorp"}
    for flags in trips.values():
        assert flags.shape == (len(frames),)
        assert flags.dtype == np.bool_


def test_zero_thresholds_trip_on_noise(small_model: DgModel):
    frames = run_scenario(small_model, None, horizon=0.05, seed=0)
    zero = RateOfChangeThresholds(0.0, 0.0, 0.0, 0.0)
    trips = baseline_trips(frames, small_model.bus_count, 1, 1e-3, zero)
    assert trips["rocov"][1:].all()
    assert not trips["rocov"][0]
