import numpy as np
import pytest
from scipy.stats import chi2

from grid_isle.dynamics.model import DgModel
from grid_isle.dynamics.scenarios import Scenario, ScenarioFile, run_scenario
from grid_isle.load_artifacts import resolve_scenario
from grid_isle.stats.skr import (
    SkrMonitor,
    SkrState,
    check,
    force_alarm,
    residual,
    update_threshold,
)


def test_residual_exact_match():
    c = np.array([[1.0, 0.0], [0.0, 2.0], [1.0, 1.0]])
    x = np.array([0.5, -1.0])
    assert residual(c @ x, x, c) == 0.0


def test_residual_3_4_5():
    y = np.array([3.0, 4.0, 0.0])
    assert residual(y, np.zeros(2), np.zeros((3, 2))) == 5.0


def test_residual_scale_equivariance():
    rng = np.random.default_rng(0)
    c = rng.normal(size=(5, 3))
    y, x = rng.normal(size=5), rng.normal(size=3)
    for alpha in (-2.0, 0.5, 3.0):
        assert residual(alpha * y, alpha * x, c) == pytest.approx(
            abs(alpha) * residual(y, x, c)
        )


def test_residual_shape_mismatch():
    with pytest.raises(ValueError):
        residual(np.zeros(3), np.zeros(2), np.zeros((2, 2)))


def test_chi2_quantile():
    state = SkrState(dof=16, confidence=0.99)
    assert state._quantile**2 == pytest.approx(32.0, abs=0.01)
    assert state._quantile**2 == pytest.approx(chi2.ppf(0.99, 16))


def test_threshold_monotone_in_confidence():
    rng = np.random.default_rng(0)
    window = rng.normal(size=(50, 9))
    thresholds = []
    for confidence in (0.9, 0.95, 0.99, 0.999):
        state = SkrState(dof=9, confidence=confidence)
        for e in window:
            xi = update_threshold(state, e)
        thresholds.append(xi)
    assert thresholds == sorted(thresholds)
    assert len(set(thresholds)) == 4


def test_constant_window_gives_stationary_threshold():
    state = SkrState(dof=3, window_size=10)
    values = [update_threshold(state, np.array([1.0, -1.0, 1.0])) for _ in range(30)]
    assert len(set(values)) == 1


def test_check_is_strict_and_needs_warmup():
    state = SkrState(dof=1, window_size=10)
    assert check(state, 0.0, 100.0) is None

    for _ in range(5):
        xi = update_threshold(state, np.array([1.0]))
    assert state.warmed_up
    assert check(state, 0.1, xi) is None

    alarm = check(state, 0.2, xi + 1e-9, source=2)
    assert alarm is not None
    assert alarm.source == 2
    assert alarm.threshold == xi
    assert state.last_alarm == 0.2


def test_force_alarm():
    alarm = force_alarm(0.77, source=1)
    assert alarm.forced
    assert alarm.t == 0.77
    assert alarm.residual > alarm.threshold


def test_state_validation():
    with pytest.raises(ValueError):
        SkrState(dof=0)
    with pytest.raises(ValueError):
        SkrState(dof=9, confidence=1.0)
    with pytest.raises(ValueError):
        SkrState(dof=9, window_size=1)


def test_monitor_tests_each_dg_on_nine_components(dg_model: DgModel):
    frames = run_scenario(dg_model, None, horizon=0.2, seed=0)
    monitor = SkrMonitor(dg_model, record_trace=False)
    monitor.run(frames)

    quantile = np.sqrt(chi2.ppf(0.99, 9))
    last = frames[-1]
    for dg, state in enumerate(monitor.states):
        assert state.dof == 9
        e = monitor.components(last.y, last.x_est, dg)
        assert e.shape == (9,)
        window = np.concatenate(state.window)
        scale = 1.4826 * np.median(np.abs(window))
        assert state.xi_t == pytest.approx(scale * quantile)


@pytest.mark.parametrize("confidence", [0.95, 0.99])
def test_nominal_stream_raises_no_alarm(dg_model: DgModel, confidence: float):
    frames = run_scenario(dg_model, None, horizon=1.0, seed=0)
    assert SkrMonitor(dg_model, confidence).run(frames) == []


def test_load_alteration_raises_no_alarm(dg_model: DgModel):
    scenario = ScenarioFile.load(resolve_scenario("load_alteration"))
    frames = run_scenario(dg_model, scenario.events, scenario.horizon_s, seed=0)
    assert SkrMonitor(dg_model).run(frames) == []


def test_control_attack_alarms_repeatedly(dg_model: DgModel):
    attack = Scenario("control_input_attack", 0.25, 0.4, 1.0, 0)
    frames = run_scenario(dg_model, attack, horizon=1.0, seed=0)
    monitor = SkrMonitor(dg_model)
    alarms = monitor.run(frames)
    inside = [a for a in alarms if 0.25 <= a.t < 0.4]
    assert len(inside) > 1
    assert min(a.t for a in alarms) >= 0.25
    assert any(a.source == 0 for a in inside)

    # One trace point per DG and sample
    assert len(monitor.trace) == 4 * len(frames)
