"""Shared domain types and the feedback document schema.

Everything here is an immutable value object; instances can be shared
freely across threads. ``validate_feedback_document`` is the single
entry point through which raw model output becomes a ``FeedbackReport``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Sequence

SPEAKERS = ("interviewer", "candidate")
OUTCOMES = ("successful", "unsuccessful")

#: Schema bound for list lengths in a feedback document.
MIN_ITEMS = 2
MAX_ITEMS = 4

#: Character cap standing in for the "1-2 sentences" expectation on details.
MAX_DETAIL_CHARS = 600

_REQUIRED_KEYS = ("strengths", "areas_for_improvement")
_ITEM_KEYS = ("title", "detail")


class FeedbackDocumentError(ValueError):
    """A feedback document failed validation; subclasses pin the reason."""


class NotParseable(FeedbackDocumentError):
    """Document is not a JSON object at the root."""


class MissingKey(FeedbackDocumentError):
    def __init__(self, key: str):
        super().__init__(f"missing required key {key!r}")
        self.key = key


class ExtraKey(FeedbackDocumentError):
    def __init__(self, key: str):
        super().__init__(f"unexpected extra key {key!r}")
        self.key = key


class BadCardinality(FeedbackDocumentError):
    def __init__(self, key: str, count: int | None):
        if count is None:
            msg = f"{key!r} is not an array"
        else:
            msg = f"{key!r} has {count} items, expected {MIN_ITEMS}-{MAX_ITEMS}"
        super().__init__(msg)
        self.key = key
        self.count = count


class BadItemShape(FeedbackDocumentError):
    def __init__(self, key: str, index: int, reason: str):
        super().__init__(f"item {index} of {key!r}: {reason}")
        self.key = key
        self.index = index
        self.reason = reason


def _require_nonempty(name: str, value: str) -> None:
    if not isinstance(value, str) or not value.strip():
        raise ValueError(f"{name} must be non-empty text")


@dataclass(frozen=True)
class Turn:
    """One utterance in an interview transcript."""

    speaker: str
    text: str

    def __post_init__(self) -> None:
        if self.speaker not in SPEAKERS:
            raise ValueError(f"speaker must be one of {SPEAKERS}, got {self.speaker!r}")
        _require_nonempty("turn text", self.text)


@dataclass(frozen=True)
class SkillAssessment:
    """Per-skill rating with supporting transcript evidence."""

    skill_name: str
    evidence: str
    rating: int

    def __post_init__(self) -> None:
        _require_nonempty("skill_name", self.skill_name)
        if not isinstance(self.rating, int) or not 1 <= self.rating <= 10:
            raise ValueError(f"rating must be an integer in [1, 10], got {self.rating!r}")


@dataclass(frozen=True)
class InterviewReport:
    """Transcript plus per-skill assessments; the sole evidence source for feedback."""

    interview_id: str
    role_title: str
    skills: tuple[SkillAssessment, ...]
    transcript: tuple[Turn, ...]
    outcome: str
    created_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))

    def __post_init__(self) -> None:
        _require_nonempty("interview_id", self.interview_id)
        _require_nonempty("role_title", self.role_title)
        object.__setattr__(self, "skills", tuple(self.skills))
        object.__setattr__(self, "transcript", tuple(self.transcript))
        if not self.transcript:
            raise ValueError("transcript must not be empty")
        if self.outcome not in OUTCOMES:
            raise ValueError(f"outcome must be one of {OUTCOMES}, got {self.outcome!r}")
        if self.created_at.tzinfo is None:
            raise ValueError("created_at must be timezone-aware (UTC)")
        object.__setattr__(self, "created_at", self.created_at.astimezone(timezone.utc))

    def to_dict(self) -> dict[str, Any]:
        return {
            "interview_id": self.interview_id,
            "role_title": self.role_title,
            "skills": [
                {"skill_name": s.skill_name, "evidence": s.evidence, "rating": s.rating}
                for s in self.skills
            ],
            "transcript": [{"speaker": t.speaker, "text": t.text} for t in self.transcript],
            "outcome": self.outcome,
            "created_at": self.created_at.isoformat(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "InterviewReport":
        return cls(
            interview_id=data["interview_id"],
            role_title=data["role_title"],
            skills=tuple(
                SkillAssessment(s["skill_name"], s["evidence"], s["rating"])
                for s in data["skills"]
            ),
            transcript=tuple(Turn(t["speaker"], t["text"]) for t in data["transcript"]),
            outcome=data["outcome"],
            created_at=datetime.fromisoformat(data["created_at"]),
        )


@dataclass(frozen=True)
class FeedbackItem:
    """A single titled feedback point."""

    title: str
    detail: str

    def __post_init__(self) -> None:
        _require_nonempty("title", self.title)
        _require_nonempty("detail", self.detail)
        if len(self.detail) > MAX_DETAIL_CHARS:
            raise ValueError(f"detail exceeds {MAX_DETAIL_CHARS} characters")


@dataclass(frozen=True)
class FeedbackReport:
    """Validated structured feedback: strengths plus areas for improvement."""

    strengths: tuple[FeedbackItem, ...]
    areas_for_improvement: tuple[FeedbackItem, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "strengths", tuple(self.strengths))
        object.__setattr__(self, "areas_for_improvement", tuple(self.areas_for_improvement))
        for name, items in (
            ("strengths", self.strengths),
            ("areas_for_improvement", self.areas_for_improvement),
        ):
            if not MIN_ITEMS <= len(items) <= MAX_ITEMS:
                raise ValueError(
                    f"{name} must hold {MIN_ITEMS}-{MAX_ITEMS} items, got {len(items)}"
                )

    def to_dict(self) -> dict[str, Any]:
        return {
            "strengths": [{"title": i.title, "detail": i.detail} for i in self.strengths],
            "areas_for_improvement": [
                {"title": i.title, "detail": i.detail} for i in self.areas_for_improvement
            ],
        }


@dataclass(frozen=True)
class Exemplar:
    """One few-shot input/output pair attached to a prompt."""

    input: str
    output: str


@dataclass(frozen=True)
class PromptBundle:
    """The unit of work sent to a chat backend: system + user + exemplars."""

    system: str
    user: str
    exemplars: tuple[Exemplar, ...] = ()

    def __post_init__(self) -> None:
        _require_nonempty("system prompt", self.system)
        _require_nonempty("user prompt", self.user)
        object.__setattr__(self, "exemplars", tuple(self.exemplars))


def validate_feedback_document(doc: str) -> FeedbackReport:
    """Parse and validate a candidate model output into a ``FeedbackReport``.

    The document must be a JSON object with exactly the keys
    ``strengths`` and ``areas_for_improvement``, each an array of 2-4
    objects carrying exactly string-valued ``title`` and ``detail``
    fields. The first violation found is raised as a specific
    ``FeedbackDocumentError`` subclass; any input string yields either a
    report or one of those errors, never an unclassified crash.

    Check order: parseability, root shape, missing keys, extra keys,
    then per-key cardinality and item shape (``strengths`` first).
    """
    if not isinstance(doc, str):
        raise NotParseable("document must be text")
    try:
        root = json.loads(doc)
    except (ValueError, RecursionError) as exc:
        raise NotParseable(f"not valid JSON: {exc}") from None
    if not isinstance(root, dict):
        raise NotParseable("root of the document is not a JSON object")

    for key in _REQUIRED_KEYS:
        if key not in root:
            raise MissingKey(key)
    for key in root:
        if key not in _REQUIRED_KEYS:
            raise ExtraKey(key)

    lists: dict[str, tuple[FeedbackItem, ...]] = {}
    for key in _REQUIRED_KEYS:
        value = root[key]
        if not isinstance(value, list):
            raise BadCardinality(key, None)
        if not MIN_ITEMS <= len(value) <= MAX_ITEMS:
            raise BadCardinality(key, len(value))
        items = []
        for index, raw in enumerate(value):
            items.append(_validate_item(key, index, raw))
        lists[key] = tuple(items)

    return FeedbackReport(
        strengths=lists["strengths"],
        areas_for_improvement=lists["areas_for_improvement"],
    )


def _validate_item(key: str, index: int, raw: Any) -> FeedbackItem:
    if not isinstance(raw, dict):
        raise BadItemShape(key, index, "not an object")
    for item_key in _ITEM_KEYS:
        if item_key not in raw:
            raise BadItemShape(key, index, f"missing field {item_key!r}")
    for item_key in raw:
        if item_key not in _ITEM_KEYS:
            raise BadItemShape(key, index, f"unknown field {item_key!r}")
    title, detail = raw["title"], raw["detail"]
    if not isinstance(title, str) or not title.strip():
        raise BadItemShape(key, index, "title must be non-empty text")
    if not isinstance(detail, str) or not detail.strip():
        raise BadItemShape(key, index, "detail must be non-empty text")
    if len(detail) > MAX_DETAIL_CHARS:
        raise BadItemShape(key, index, f"detail exceeds {MAX_DETAIL_CHARS} characters")
    return FeedbackItem(title=title, detail=detail)


def serialize_feedback_report(report: FeedbackReport) -> str:
    """Render a report back to its canonical two-key JSON wire form."""
    return json.dumps(report.to_dict(), ensure_ascii=False)


def feedback_report_from_items(
    strengths: Sequence[tuple[str, str]],
    improvements: Sequence[tuple[str, str]],
) -> FeedbackReport:
    """Build a report from (title, detail) pairs; convenience for fixtures."""
    return FeedbackReport(
        strengths=tuple(FeedbackItem(t, d) for t, d in strengths),
        areas_for_improvement=tuple(FeedbackItem(t, d) for t, d in improvements),
    )
