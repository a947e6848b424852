"""Command-line subcommands."""
from .dispatch import Dispatch
from .run import Run
from .solve import Solve
from .train import Train
