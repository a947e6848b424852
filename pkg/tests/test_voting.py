import itertools

import pytest

from grid_isle.detection.voting import ISLANDING, NO_ISLANDING, credible, decide
from grid_isle.errors import DetectionError


def counted(votes):
    """Yield from `votes` and record how many rounds were drawn."""
    drawn = []

    def gen():
        for vote in votes:
            drawn.append(vote)
            yield vote

    return gen(), drawn


@pytest.mark.parametrize(
    "votes,label,credibility,rounds_used",
    [
        # Unanimous rounds exit early
        ([(1, 1, 1)] * 5, ISLANDING, 1.0, 3),
        ([(0, 0, 0)] * 5, NO_ISLANDING, 0.0, 3),
        # 5/9 after three rounds, 11/15 at the end
        ([(1, 1, 1), (1, 1, 0), (0, 0, 0), (1, 1, 1), (1, 1, 1)], 1, 11 / 15, 5),
        # 3/9, then 4/15
        ([(1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 0, 0), (0, 0, 0)], 0, 4 / 15, 5),
        # 8/9 is not within 0.1 of unanimity
        ([(1, 1, 1), (1, 1, 1), (1, 1, 0), (0, 0, 0), (0, 0, 0)], 1, 8 / 15, 5),
        ([(1, 1, 1), (1, 1, 1), (1, 0, 0), (0, 0, 0), (0, 0, 0)], 0, 7 / 15, 5),
        ([(0, 0, 0), (0, 0, 0), (0, 0, 1), (1, 1, 1), (1, 1, 1)], 0, 7 / 15, 5),
        # A late swing after a mixed start
        ([(0, 1, 0), (1, 0, 0), (0, 0, 0), (1, 1, 1), (1, 1, 1)], 1, 8 / 15, 5),
        ([(1, 1, 0), (1, 0, 1), (0, 1, 1), (0, 0, 0), (0, 0, 0)], 0, 6 / 15, 5),
        ([(1, 1, 0), (1, 0, 1), (0, 1, 1), (1, 0, 0), (1, 0, 0)], 1, 8 / 15, 5),
    ],
)
def test_hand_traces(votes, label, credibility, rounds_used):
    stream, drawn = counted(votes)
    decision = decide(stream)
    assert decision.label == label
    assert decision.credibility == pytest.approx(credibility)
    assert decision.rounds_used == rounds_used
    assert len(drawn) == rounds_used
    assert decision.votes == votes[:rounds_used]


def test_exactly_one_half_goes_to_islanding():
    decision = decide([(1,), (1,), (0,), (0,)], rounds=4, classifiers=1)
    assert decision.credibility == 0.5
    assert decision.islanding


def test_early_round_is_clamped():
    decision = decide([(1, 0, 1)], rounds=1)
    assert decision.rounds_used == 1
    assert decision.label == ISLANDING


def test_credibility_trace():
    votes = [(1, 1, 1), (1, 1, 0), (0, 0, 0), (1, 1, 1), (1, 1, 1)]
    trace = decide(votes).credibility_trace()
    assert trace == pytest.approx([1.0, 5 / 6, 5 / 9, 8 / 12, 11 / 15])


def test_short_stream():
    with pytest.raises(DetectionError, match="after 2 of 5"):
        decide([(1, 0, 0), (0, 1, 0)])


@pytest.mark.parametrize("bad", [(1, 0), (1, 0, 2), (1, 1, 1, 1)])
def test_invalid_votes(bad):
    with pytest.raises(DetectionError, match="invalid votes"):
        decide([(1, 1, 0), bad, (0, 0, 0)])


def test_classifier_order_does_not_matter():
    votes = [(1, 0, 0), (0, 1, 1), (1, 0, 1), (0, 0, 1), (1, 1, 0)]
    reference = decide(votes)
    for perm in itertools.permutations(range(3)):
        shuffled = [tuple(v[i] for i in perm) for v in votes]
        decision = decide(shuffled)
        assert decision.label == reference.label
        assert decision.credibility == reference.credibility


def test_credible():
    assert credible(0.0) and credible(0.1) and credible(0.9) and credible(1.0)
    assert not credible(0.5)
    assert not credible(8 / 9)
