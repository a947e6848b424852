"""Event-triggered adaptive controlled islanding."""
from .detection import EnsembleDetector
from .grid import GridTopology, load_case
from .opt import build_milp, solve
from .pipeline import RunConfig, RunReport, emit_report, run_pipeline
