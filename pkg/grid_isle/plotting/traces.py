"""Residual, threshold and credibility traces as plotly figures."""
from typing import TYPE_CHECKING, Sequence

from plotly import graph_objects as go

from ..stats.skr import AlarmEvent, TracePoint

if TYPE_CHECKING:
    from ..pipeline import Session


def residual_figure(
    trace: Sequence[TracePoint],
    alarms: Sequence[AlarmEvent] = (),
    title: str = "Residual and dynamic threshold",
) -> go.Figure:
    """Residual and threshold of every source over time, with alarm markers.

    Args:
        trace: Samples recorded by the trigger.
        alarms: Alarms to mark on the residual curves.
        title: The title of the plot.

    Returns:
        The plotly figure.
    """
    fig = go.Figure()
    for source in sorted({p.source for p in trace}):
        points = [p for p in trace if p.source == source]
        t = [p.t for p in points]
        fig.add_trace(
            go.Scatter(x=t, y=[p.residual for p in points], name=f"r (DG {source})")
        )
        fig.add_trace(
            go.Scatter(
                x=t,
                y=[p.threshold for p in points],
                name=f"xi (DG {source})",
                line=dict(dash="dash"),
            )
        )
    if alarms:
        fig.add_trace(
            go.Scatter(
                x=[a.t for a in alarms],
                y=[a.residual for a in alarms],
                mode="markers",
                marker=dict(symbol="x", size=8),
                name="alarm",
            )
        )
    return fig.update_layout(
        title_text=title,
        title_x=0.5,
        xaxis_title="Time (s)",
        yaxis_title="Residual",
        yaxis_type="log",
    )


def credibility_figure(
    sessions: Sequence["Session"],
    title: str = "Credibility per voting round",
    max_sessions: int = 50,
) -> go.Figure:
    """Running credibility against the round number for the first sessions."""
    fig = go.Figure()
    for session in sessions[:max_sessions]:
        if session.decision is None:
            continue
        cred = session.decision.credibility_trace()
        fig.add_trace(
            go.Scatter(
                x=list(range(1, len(cred) + 1)),
                y=cred,
                mode="lines+markers",
                name=f"t={session.alarm.t:.3f}s",
            )
        )
    for level in (0.1, 0.9):
        fig.add_hline(y=level, line_dash="dot")
    return fig.update_layout(
        title_text=title,
        title_x=0.5,
        xaxis_title="Round",
        yaxis_title="Credibility",
        yaxis_range=[0, 1],
    )
