import json
from unittest.mock import MagicMock

import pytest

from grid_isle.detection.ensemble import (
    BundleConfig,
    EnsembleDetector,
    train_ensemble,
)
from grid_isle.dynamics.model import DgModel, synthetic_dg_model
from grid_isle.dynamics.scenarios import ScenarioFile, make_training_set
from grid_isle.grid.topology import GridTopology, load_case
from grid_isle.load_artifacts import resolve_case, resolve_scenario

TRAINING_SCENARIOS = ("pcc_fault", "control_attack", "line_to_line_fault")


@pytest.fixture(scope="module")
def rts24_doc() -> dict:
    with open(resolve_case("rts24")) as f:
        return json.load(f)


@pytest.fixture(scope="module")
def rts24(rts24_doc: dict) -> GridTopology:
    return load_case(rts24_doc)


@pytest.fixture(scope="module")
def two_bus_doc() -> dict:
    return {
        "name": "two-bus",
        "buses": [{"id": 1}, {"id": 2}],
        "lines": [
            {"id": "L1", "from": 1, "to": 2, "p_min_mw": -100.0, "p_max_mw": 100.0}
        ],
        "generators": [
            {
                "id": "G1",
                "bus": 1,
                "p_min_mw": 0.0,
                "p_max_mw": 100.0,
                "p0_mw": 50.0,
                "chi_per_mw": 0.01,
                "cost_segments": [{"mw_upto": 100.0, "usd_per_mwh": 20.0}],
            }
        ],
        "loads": [{"id": "D2", "bus": 2, "p_mw": 50.0, "critical_fraction": 0.5}],
    }


@pytest.fixture(scope="module")
def two_bus(two_bus_doc: dict) -> GridTopology:
    return load_case(two_bus_doc)


@pytest.fixture(scope="module")
def dg_model() -> DgModel:
    return synthetic_dg_model(dg_count=4, bus_count=6, seed=0)


@pytest.fixture(scope="module")
def small_model() -> DgModel:
    return synthetic_dg_model(dg_count=2, bus_count=3, seed=1)


@pytest.fixture(scope="module")
def trained_detector(dg_model: DgModel) -> EnsembleDetector:
    events = [
        ev
        for name in (*TRAINING_SCENARIOS, "load_alteration")
        for ev in ScenarioFile.load(resolve_scenario(name)).events
    ]
    seeds = [0, 1, 2]
    dataset = make_training_set(dg_model, events, seeds, max_per_class=150)
    config = BundleConfig(n_learners=5, training_seeds=seeds, model_seed=0)
    return train_ensemble(dataset, config)


@pytest.fixture
def voting_detector():
    """A stand-in detector whose every round votes `classify_round.return_value`."""
    detector = MagicMock()
    detector.config = BundleConfig()
    detector.layout = detector.config.layout
    detector.invocations = 0
    detector.round_ms = []
    detector.classify_round.return_value = (1, 1, 1)
    return detector
