"""Small-signal DG dynamics and scenario simulation."""
from .model import DgModel, channel_names, discretize, step, synthetic_dg_model
from .scenarios import (
    ForcedAlarm,
    MeasurementFrame,
    Scenario,
    ScenarioFile,
    TrainingSet,
    export_stream,
    make_training_set,
    run_scenario,
)
