"""Usage metrics over the service event streams.

All functions are pure: recomputing over the same event log always
yields identical values. The interview-quality comparison rows are a
fixed reference dataset from the production evaluation, embedded for
display and regression, not recomputable from desk-scale data.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from datetime import datetime
from typing import Sequence


class AnalyticsError(ValueError):
    """Base class for metric input errors."""


class ZeroDenominator(AnalyticsError):
    pass


class CountExceedsTotal(AnalyticsError):
    pass


class EmptyEventLog(AnalyticsError):
    pass


class RatingOutOfRange(AnalyticsError):
    pass


@dataclass(frozen=True)
class QueryEvent:
    """One routed candidate query: resolved automatically or escalated."""

    timestamp: datetime
    resolved: bool


@dataclass(frozen=True)
class ScoreComparison:
    """Interview-quality scores (0-10) across the three interview formats."""

    metric_name: str
    human_led: float
    previous_system: float
    current_system: float

    def __post_init__(self) -> None:
        for field_name in ("human_led", "previous_system", "current_system"):
            value = getattr(self, field_name)
            if not 0.0 <= value <= 10.0:
                raise ValueError(f"{field_name} must be in [0, 10], got {value}")


def feedback_request_rate(unsuccessful_interviews: int, feedback_requests: int) -> float:
    """Fraction of unsuccessful interviews that requested feedback, 3 decimals."""
    if unsuccessful_interviews <= 0:
        raise ZeroDenominator("unsuccessful_interviews must be > 0")
    if feedback_requests < 0:
        raise AnalyticsError("feedback_requests must be >= 0")
    if feedback_requests > unsuccessful_interviews:
        raise CountExceedsTotal(
            f"{feedback_requests} requests exceed {unsuccessful_interviews} interviews"
        )
    return round(feedback_requests / unsuccessful_interviews, 3)


def deflection_rate(events: Sequence[QueryEvent]) -> float:
    """Fraction of queries resolved without human intervention."""
    if not events:
        raise EmptyEventLog("deflection rate needs at least one query event")
    resolved = sum(1 for event in events if event.resolved)
    return resolved / len(events)


def mean_rating(ratings: Sequence[int]) -> float:
    """Arithmetic mean of 1-5 satisfaction ratings, 2 decimals."""
    if not ratings:
        raise EmptyEventLog("mean rating needs at least one rating")
    for rating in ratings:
        if not isinstance(rating, int) or not 1 <= rating <= 5:
            raise RatingOutOfRange(f"ratings must be integers in [1, 5], got {rating!r}")
    return round(sum(ratings) / len(ratings), 2)


#: Production reference scores: (metric, human-led, previous system, current system).
_COMPARISON_ROWS = (
    ("technical_question_quality", 7.78, 8.38, 8.60),
    ("conversational_dynamics", 5.49, 7.77, 8.27),
)


def comparison_table() -> list[ScoreComparison]:
    """The fixed interview-quality comparison rows."""
    return [
        ScoreComparison(metric_name=name, human_led=h, previous_system=p, current_system=c)
        for name, h, p, c in _COMPARISON_ROWS
    ]


def comparison_table_csv() -> str:
    """The comparison rows as plot-ready CSV."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["metric", "human_led", "previous_system", "current_system"])
    for row in comparison_table():
        writer.writerow([row.metric_name, row.human_led, row.previous_system, row.current_system])
    return buffer.getvalue()
