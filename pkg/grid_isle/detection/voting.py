"""Rolling-window hard voting with an early exit on credible rounds."""
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from ..errors import DetectionError

logger = logging.getLogger(__name__)

NO_ISLANDING, ISLANDING = 0, 1


@dataclass(frozen=True)
class Decision:
    """Outcome of a voting session."""

    label: int
    credibility: float
    rounds_used: int
    votes: list[tuple[int, ...]] = field(default_factory=list)

    @property
    def islanding(self) -> bool:
        """Whether the session asks for islanding."""
        return self.label == ISLANDING

    def credibility_trace(self) -> list[float]:
        """Running credibility after every round."""
        score, trace = 0, []
        for k, vote in enumerate(self.votes, start=1):
            score += sum(vote)
            trace.append(score / (k * len(vote)))
        return trace

    def to_dict(self) -> dict:
        """Convert to a dictionary."""
        return dict(
            label=self.label,
            credibility=self.credibility,
            rounds_used=self.rounds_used,
            votes=[list(v) for v in self.votes],
        )


def credible(credibility: float, margin: float = 0.1) -> bool:
    """Whether a credibility is within `margin` of unanimity."""
    return credibility <= margin or credibility >= 1 - margin


def _round_half_up(credibility: float) -> int:
    return ISLANDING if credibility >= 0.5 else NO_ISLANDING


def decide(
    votes: Iterable[Sequence[int]],
    rounds: int = 5,
    classifiers: int = 3,
    early_round: int = 3,
) -> Decision:
    """Accumulate classifier votes round by round.

    After `early_round` rounds a credibility within 0.1 of either extreme decides
    the session. Otherwise voting continues to `rounds` and the final credibility
    is rounded, with exactly 0.5 going to islanding. The vote stream is consumed
    lazily, so later rounds are never requested after an early decision.

    Args:
        votes: Iterable of per-round label tuples, one label per classifier.
        rounds: Total rounds NR.
        classifiers: Classifiers per round NC.
        early_round: Round at which the early exit is checked.

    Raises:
        DetectionError: If the stream ends before a decision, or a round does not
            hold `classifiers` labels in {0, 1}.
    """
    if rounds < 1 or classifiers < 1:
        raise DetectionError("Need at least one round and one classifier")
    early_round = min(early_round, rounds)

    stream = iter(votes)
    score, seen = 0, []
    for k in range(1, rounds + 1):
        try:
            vote = tuple(int(v) for v in next(stream))
        except StopIteration:
            raise DetectionError(
                f"Vote stream ended after {k - 1} of {rounds} rounds"
            ) from None
        if len(vote) != classifiers or any(v not in (0, 1) for v in vote):
            raise DetectionError(f"Round {k} has invalid votes {vote}")

        score += sum(vote)
        seen.append(vote)
        credibility = score / (k * classifiers)
        logger.debug(f"Round {k}: votes {vote}, credibility {credibility:.3f}")
        if k == early_round and (credible(credibility) or k == rounds):
            return Decision(_round_half_up(credibility), credibility, k, seen)

    credibility = score / (rounds * classifiers)
    return Decision(_round_half_up(credibility), credibility, rounds, seen)
