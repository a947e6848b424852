from plotly import graph_objects as go

from grid_isle.detection.voting import Decision
from grid_isle.pipeline import Session
from grid_isle.plotting import credibility_figure, residual_figure
from grid_isle.stats.skr import AlarmEvent, TracePoint


def test_residual_figure():
    trace = [
        TracePoint(t=k * 1e-3, source=s, residual=0.1, threshold=0.2)
        for k in range(5)
        for s in (0, 1)
    ]
    alarm = AlarmEvent(t=3e-3, residual=0.3, threshold=0.2, source=1)
    fig = residual_figure(trace, [alarm])
    assert isinstance(fig, go.Figure)
    # Residual and threshold per source, plus the alarm markers
    assert len(fig.data) == 5
    assert fig.data[-1].name == "alarm"
    assert list(fig.data[0].x) == [k * 1e-3 for k in range(5)]


def test_credibility_figure_skips_undecided_sessions():
    alarm = AlarmEvent(t=0.3, residual=1.0, threshold=0.5, source=0)
    decided = Session(
        alarm, Decision(label=1, credibility=1.0, rounds_used=3, votes=[(1, 1, 1)] * 3)
    )
    fig = credibility_figure([decided, Session(alarm)])
    assert len(fig.data) == 1
    assert list(fig.data[0].y) == [1.0, 1.0, 1.0]
    assert list(fig.data[0].x) == [1, 2, 3]
