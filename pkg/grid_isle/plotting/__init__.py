"""Figures of the trigger and voting traces."""
from .traces import credibility_figure, residual_figure
