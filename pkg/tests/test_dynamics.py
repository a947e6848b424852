import numpy as np
import pytest

from grid_isle.dynamics.model import DgModel, discretize, step, synthetic_dg_model
from grid_isle.dynamics.scenarios import (
    Scenario,
    ScenarioFile,
    export_stream,
    frame_stratum,
    make_training_set,
    run_scenario,
    stratified_sample,
)
from grid_isle.errors import ConfigError, DetectionError
from grid_isle.load_artifacts import available_scenarios, resolve_scenario


def test_zero_is_a_fixed_point(small_model: DgModel):
    nxt, y = step(
        small_model, np.zeros(small_model.state_dim), np.zeros(small_model.input_dim)
    )
    assert not nxt.any()
    assert not y.any()


def test_superposition(small_model: DgModel):
    rng = np.random.default_rng(0)
    s1, s2 = rng.normal(size=(2, small_model.state_dim))
    u1, u2 = rng.normal(size=(2, small_model.input_dim))
    a, ya = step(small_model, s1 + s2, u1 + u2)
    b, yb = step(small_model, s1, u1)
    c, yc = step(small_model, s2, u2)
    np.testing.assert_allclose(a, b + c, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(ya, yb + yc, rtol=1e-9, atol=1e-12)


def test_free_response_decays(small_model: DgModel):
    assert small_model.spectral_radius() < 1
    state = np.ones(small_model.state_dim)
    u = np.zeros(small_model.input_dim)
    norms = []
    for _ in range(2000):
        state, _ = step(small_model, state, u)
        norms.append(np.linalg.norm(state))
    assert norms[-1] < 1e-3 * norms[0]


def test_euler_matches_exact_for_small_steps():
    a = np.array([[-1.0, 0.5], [-0.5, -2.0]])
    b = np.eye(2)
    ad_exact, bd_exact = discretize(a, b, 1e-5, "exact")
    ad_euler, bd_euler = discretize(a, b, 1e-5, "euler")
    np.testing.assert_allclose(ad_exact, ad_euler, atol=1e-9)
    np.testing.assert_allclose(bd_exact, bd_euler, atol=1e-9)
    with pytest.raises(ValueError):
        discretize(a, b, 0.0, "exact")


def test_unstable_model_is_rejected(small_model: DgModel):
    with pytest.raises(ValueError, match="unstable"):
        DgModel(
            a_tilde=np.eye(small_model.state_dim),
            b_mat=small_model.b_mat,
            c_mat=small_model.c_mat,
            k_mat=small_model.k_mat,
            dt=1e-3,
            y0=small_model.y0,
            bus_count=small_model.bus_count,
            dg_count=small_model.dg_count,
        )


def test_synthetic_model_is_seeded():
    a = synthetic_dg_model(seed=3)
    b = synthetic_dg_model(seed=3)
    np.testing.assert_array_equal(a.a_tilde, b.a_tilde)
    assert a.output_dim == 3 * 6 + 9 * 4


def test_nominal_run_is_labeled_nominal(dg_model: DgModel):
    frames = run_scenario(dg_model, None, horizon=0.2, seed=0)
    assert len(frames) == 200
    assert all(f.label == 0 for f in frames)
    assert frames[1].t == pytest.approx(1e-3)


def test_attack_window_is_labeled(dg_model: DgModel):
    attack = Scenario("control_input_attack", 0.25, 0.4, 1.0, 0)
    frames = run_scenario(dg_model, attack, horizon=0.5, seed=0)
    labels = {round(f.t, 6): f.label for f in frames}
    assert labels[0.24] == 0
    assert labels[0.26] == 1
    assert labels[0.39] == 1
    assert labels[0.41] == 0
    assert sum(labels.values()) in (149, 150, 151)


def test_load_alteration_stays_bounded(dg_model: DgModel):
    scenario = ScenarioFile.load(resolve_scenario("load_alteration"))
    frames = run_scenario(dg_model, scenario.events, scenario.horizon_s, seed=0)
    assert all(f.label == 0 for f in frames)
    assert all(np.all(np.isfinite(f.y)) for f in frames)
    dev = max(np.abs(f.y - dg_model.y0).max() for f in frames)
    assert dev < 10.0


def test_runs_are_reproducible(dg_model: DgModel):
    ev = Scenario("three_phase_fault_pcc", 0.1, 0.15, 0.5, 1)
    a = run_scenario(dg_model, ev, horizon=0.2, seed=7)
    b = run_scenario(dg_model, ev, horizon=0.2, seed=7)
    assert all(np.array_equal(x.y, y.y) for x, y in zip(a, b))


def test_event_outside_horizon(dg_model: DgModel):
    with pytest.raises(ConfigError):
        run_scenario(dg_model, Scenario("control_input_attack", 0.1, 2.0, 1.0), 1.0, 0)
    with pytest.raises(ConfigError):
        Scenario("control_input_attack", 0.4, 0.25)
    with pytest.raises(ConfigError):
        Scenario("meteor_strike")


def test_bundled_scenarios_load():
    assert {
        "nominal",
        "pcc_fault",
        "control_attack",
        "line_to_line_fault",
        "load_alteration",
        "bus4_persistent_attack",
    } <= available_scenarios()
    forced = ScenarioFile.load(resolve_scenario("load_alteration")).forced_alarms
    assert [(a.t, a.source) for a in forced] == [(0.77, 0)]


def test_scenario_file_ignores_unknown_keys(caplog):
    scenario = ScenarioFile.from_dict({"events": [], "colour": "blue"})
    assert scenario.events == []
    assert "Ignoring config key 'colour'" in caplog.text


def test_training_set_has_both_classes(small_model: DgModel):
    events = [
        Scenario("control_input_attack", 0.25, 0.4, 1.0, 0),
        Scenario("load_alteration", 0.1, 0.3, 0.5, 1),
    ]
    data = make_training_set(small_model, events, seeds=[0, 1], horizon=0.5)
    counts = data.class_counts()
    assert counts[0] > 0 and counts[1] > 0
    assert data.x.shape == (len(data), 3 * 3 + 9 * 2)

    with pytest.raises(DetectionError):
        make_training_set(small_model, [], seeds=[0])


def test_frame_stratum():
    ev = Scenario("load_alteration", 0.2, 0.4, 0.5, 0)
    assert frame_stratum(ev, 0.1) == "nominal"
    assert frame_stratum(ev, 0.2) == "load_alteration"
    assert frame_stratum(ev, 0.4) == "load_alteration:after"
    assert frame_stratum(Scenario("nominal"), 0.5) == "nominal"


def test_stratified_sample_spreads_the_budget():
    strata = np.array(["a"] * 100 + ["b"] * 10 + ["c"] * 1000)
    rng = np.random.default_rng(0)

    def counts(idx):
        names, n = np.unique(strata[idx], return_counts=True)
        return dict(zip(names.tolist(), n.tolist()))

    # The small stratum is kept whole, the rest is split evenly
    assert counts(stratified_sample(strata, 90, rng)) == {"a": 40, "b": 10, "c": 40}
    weighted = stratified_sample(strata, 90, rng, {"c": 3.0})
    assert counts(weighted) == {"a": 20, "b": 10, "c": 60}
    assert len(np.unique(weighted)) == 90
    assert len(stratified_sample(strata, 10_000, rng)) == len(strata)
    assert len(stratified_sample(strata[:0], 10, rng)) == 0


def test_training_set_keeps_load_alteration_frames(small_model: DgModel):
    events = [
        ev
        for name in (
            "pcc_fault",
            "control_attack",
            "line_to_line_fault",
            "load_alteration",
        )
        for ev in ScenarioFile.load(resolve_scenario(name)).events
    ]
    data = make_training_set(small_model, events, seeds=[0, 1], max_per_class=200)
    assert data.class_counts() == {0: 200, 1: 200}
    strata = data.stratum_counts()
    # Three times the share of each of the five other negative strata
    assert strata["load_alteration"] == 75
    assert strata["nominal"] == 25
    assert (data.y[data.strata == "load_alteration"] == 0).all()


def test_nominal_only_training_set_warns(small_model: DgModel, caplog):
    data = make_training_set(
        small_model, [Scenario("nominal")], seeds=[0], horizon=0.1
    )
    assert data.class_counts()[1] == 0
    assert "single class" in caplog.text


def test_export_stream(dg_model: DgModel, tmp_path):
    frames = run_scenario(dg_model, None, horizon=0.01, seed=0)
    export_stream(frames, tmp_path / "stream.csv")
    lines = (tmp_path / "stream.csv").read_text().splitlines()
    assert lines[0].startswith("t,label,v_pu_0")
    assert len(lines) == 11
