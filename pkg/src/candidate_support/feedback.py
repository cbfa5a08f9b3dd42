"""Post-interview feedback generation.

Stages a draft completion through validation, a reflective rewrite pass,
and a lexical guardrail scan, retrying with corrective instructions when
the model output is malformed or trips a guardrail. Prompt texts live as
versioned assets under ``prompts/`` and are loaded verbatim.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from . import prompt_assets
from .domain import (
    Exemplar,
    FeedbackDocumentError,
    FeedbackReport,
    InterviewReport,
    PromptBundle,
    serialize_feedback_report,
    validate_feedback_document,
)
from .gateway import CompletionRequest, Gateway

#: Lists the pipeline produces are kept at 2-3 items even though the
#: document schema tolerates 4.
TARGET_MAX_ITEMS = 3

DEFAULT_MAX_RETRIES = 2

FEEDBACK_SYSTEM_PROMPT = prompt_assets.load("feedback_system.txt")
FEEDBACK_USER_TEMPLATE = prompt_assets.load("feedback_user.txt")
REVIEW_USER_TEMPLATE = prompt_assets.load("review_user.txt")
CORRECTIONS_TEMPLATE = prompt_assets.load("corrections.txt")


class ViolationKind(enum.Enum):
    NEGATIVE_LANGUAGE = "NegativeLanguage"
    SENIORITY_RATING = "SeniorityRating"
    THIRD_PERSON = "ThirdPerson"
    SOFT_SKILL_IN_IMPROVEMENT = "SoftSkillInImprovement"


@dataclass(frozen=True)
class GuardrailViolation:
    """One lexical guardrail hit, located by list name and item index."""

    kind: ViolationKind
    location: tuple[str, int]
    matched_text: str

    def describe(self) -> str:
        list_name, index = self.location
        return (
            f"{list_name} item {index}: {self.kind.value} guardrail matched "
            f"{self.matched_text!r}"
        )


@dataclass(frozen=True)
class GuardrailLexicon:
    """Term lists driving the guardrail scan.

    ``negative_terms`` is the configurable word list; the other groups
    encode fixed prompt rules (no seniority ratings, address the
    candidate as "you", no soft-skill critique in improvements).
    """

    negative_terms: tuple[str, ...] = ("failed", "poor", "weak", "inadequate", "terrible")
    seniority_terms: tuple[str, ...] = ("senior", "junior")
    third_person_terms: tuple[str, ...] = ("the candidate", "he", "she", "they")
    soft_skill_terms: tuple[str, ...] = ("communication", "soft skill")

    @classmethod
    def with_negative_terms_from(cls, path: str | Path) -> "GuardrailLexicon":
        """Replace the negative word list with one term per file line."""
        terms = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            term = line.strip()
            if term and not term.startswith("#"):
                terms.append(term.lower())
        if not terms:
            raise ValueError(f"lexicon file {path} holds no terms")
        return cls(negative_terms=tuple(terms))


DEFAULT_LEXICON = GuardrailLexicon()


def _term_pattern(term: str) -> re.Pattern[str]:
    # Whole-word match with an optional plural "s"; "senior" must not
    # fire inside "seniority".
    return re.compile(r"\b" + re.escape(term) + r"s?\b", re.IGNORECASE)


def guardrail_scan(
    report: FeedbackReport, lexicon: GuardrailLexicon = DEFAULT_LEXICON
) -> list[GuardrailViolation]:
    """Deterministic lexical scan of a report; an empty list means clean.

    Negative, seniority, and third-person terms are checked in both
    lists; soft-skill terms only inside ``areas_for_improvement``. One
    violation is emitted per (item, kind, term) with the first matched
    text, scanning titles before details.
    """
    violations: list[GuardrailViolation] = []
    for list_name, items in (
        ("strengths", report.strengths),
        ("areas_for_improvement", report.areas_for_improvement),
    ):
        groups = [
            (ViolationKind.NEGATIVE_LANGUAGE, lexicon.negative_terms),
            (ViolationKind.SENIORITY_RATING, lexicon.seniority_terms),
            (ViolationKind.THIRD_PERSON, lexicon.third_person_terms),
        ]
        if list_name == "areas_for_improvement":
            groups.append((ViolationKind.SOFT_SKILL_IN_IMPROVEMENT, lexicon.soft_skill_terms))
        for index, item in enumerate(items):
            for kind, terms in groups:
                for term in terms:
                    pattern = _term_pattern(term)
                    match = pattern.search(item.title) or pattern.search(item.detail)
                    if match:
                        violations.append(
                            GuardrailViolation(
                                kind=kind,
                                location=(list_name, index),
                                matched_text=match.group(0),
                            )
                        )
    return violations


def render_interview_report(report: InterviewReport) -> str:
    """Canonical plain-text serialization of a report for prompting.

    Ordered and labeled so that equal reports always produce equal
    prompt text (and therefore equal bundle digests).
    """
    lines = [f"Role: {report.role_title}", f"Outcome: {report.outcome}", "Skills:"]
    for skill in report.skills:
        lines.append(f"- {skill.skill_name} (rating {skill.rating}/10): {skill.evidence}")
    lines.append("Transcript:")
    for turn in report.transcript:
        lines.append(f"- {turn.speaker}: {turn.text}")
    return "\n".join(lines)


def build_feedback_prompt(
    report: InterviewReport, exemplars: Sequence[Exemplar] = ()
) -> PromptBundle:
    """Assemble the drafting bundle from the verbatim prompt templates."""
    user = FEEDBACK_USER_TEMPLATE.replace("{INTERVIEW_REPORT}", render_interview_report(report))
    return PromptBundle(system=FEEDBACK_SYSTEM_PROMPT, user=user, exemplars=tuple(exemplars))


def build_review_prompt(draft: FeedbackReport) -> PromptBundle:
    """Assemble the reflective-review bundle for a validated draft."""
    user = REVIEW_USER_TEMPLATE.replace("{FEEDBACK_JSON}", serialize_feedback_report(draft))
    return PromptBundle(system=FEEDBACK_SYSTEM_PROMPT, user=user)


def with_corrections(bundle: PromptBundle, problems: Sequence[str]) -> PromptBundle:
    """A retry bundle: the original user prompt plus corrective instructions."""
    listing = "\n".join(f"- {problem}" for problem in problems)
    suffix = CORRECTIONS_TEMPLATE.replace("{PROBLEMS}", listing)
    return PromptBundle(
        system=bundle.system, user=bundle.user + "\n\n" + suffix, exemplars=bundle.exemplars
    )


class FeedbackPipelineError(Exception):
    """Base class for pipeline failures."""


class OutcomeNotEligible(FeedbackPipelineError):
    """Feedback is only generated for unsuccessful interview outcomes."""


class ReviewOutputInvalid(FeedbackPipelineError):
    """The reflective review returned malformed or structure-breaking output."""


class RetriesExhausted(FeedbackPipelineError):
    """Every attempt produced an invalid or guardrail-dirty result."""

    def __init__(self, last_errors: Sequence[object], attempts: int):
        self.last_errors = tuple(last_errors)
        self.attempts = attempts
        described = "; ".join(_describe_problem(p) for p in self.last_errors)
        super().__init__(f"gave up after {attempts} attempts: {described}")


def _describe_problem(problem: object) -> str:
    if isinstance(problem, GuardrailViolation):
        return problem.describe()
    return str(problem)


class JobStatus(enum.Enum):
    PENDING = "pending"
    DRAFTED = "drafted"
    REVIEWED = "reviewed"
    DELIVERED = "delivered"
    FAILED = "failed"


@dataclass(frozen=True)
class FeedbackJob:
    """Persistent record of one feedback generation request."""

    job_id: str
    interview_id: str
    status: JobStatus = JobStatus.PENDING
    attempts: int = 0
    result: FeedbackReport | None = None

    def __post_init__(self) -> None:
        if self.attempts < 0:
            raise ValueError("attempts must be >= 0")
        if self.status is JobStatus.DELIVERED and self.result is None:
            raise ValueError("a delivered job must carry its report")


@dataclass(frozen=True)
class FeedbackResult:
    """Successful pipeline outcome: the clean report and attempts used."""

    report: FeedbackReport
    attempts: int


class FeedbackPipeline:
    """Drives draft, review, and guardrail stages with bounded retry.

    On a validation failure, an over-long list, a broken review, or a
    dirty guardrail scan, the draft stage reruns with the problems
    appended to the user prompt as corrective instructions, up to
    ``max_retries`` extra attempts.
    """

    def __init__(
        self,
        gateway: Gateway,
        *,
        exemplars: Sequence[Exemplar] = (),
        lexicon: GuardrailLexicon = DEFAULT_LEXICON,
        max_retries: int = DEFAULT_MAX_RETRIES,
        temperature: float = 0.0,
    ):
        if not 0 <= max_retries <= 5:
            raise ValueError("max_retries must be in [0, 5]")
        self.gateway = gateway
        self.exemplars = tuple(exemplars)
        self.lexicon = lexicon
        self.max_retries = max_retries
        self.temperature = temperature

    def reflective_review(self, draft: FeedbackReport) -> FeedbackReport:
        """Second completion that rewrites the draft without changing shape.

        The rewrite instruction asks for softened, supportive, past-tense
        phrasing; output is re-validated and must preserve both list
        lengths exactly.
        """
        bundle = build_review_prompt(draft)
        text = self.gateway.complete(CompletionRequest(bundle, temperature=self.temperature))
        try:
            reviewed = validate_feedback_document(text)
        except FeedbackDocumentError as exc:
            raise ReviewOutputInvalid(f"review output failed validation: {exc}") from exc
        if len(reviewed.strengths) != len(draft.strengths) or len(
            reviewed.areas_for_improvement
        ) != len(draft.areas_for_improvement):
            raise ReviewOutputInvalid("review output changed the list lengths")
        return reviewed

    def generate_feedback(
        self,
        report: InterviewReport,
        on_stage: Callable[[JobStatus], None] | None = None,
    ) -> FeedbackResult:
        """Run the full pipeline for one unsuccessful interview.

        ``on_stage`` observes DRAFTED and REVIEWED transitions, which the
        service layer persists onto the job record.
        """
        if report.outcome != "unsuccessful":
            raise OutcomeNotEligible(
                f"interview {report.interview_id} has outcome {report.outcome!r}"
            )
        base = build_feedback_prompt(report, self.exemplars)
        bundle = base
        attempts = 0
        problems: list[object] = []
        while attempts <= self.max_retries:
            attempts += 1
            text = self.gateway.complete(CompletionRequest(bundle, temperature=self.temperature))
            problems = []
            draft: FeedbackReport | None = None
            try:
                draft = validate_feedback_document(text)
            except FeedbackDocumentError as exc:
                problems.append(f"response was not a valid feedback document: {exc}")
            if draft is not None:
                for name, items in (
                    ("strengths", draft.strengths),
                    ("areas_for_improvement", draft.areas_for_improvement),
                ):
                    if len(items) > TARGET_MAX_ITEMS:
                        problems.append(
                            f"{name} has {len(items)} items; provide 2-{TARGET_MAX_ITEMS}"
                        )
            if draft is not None and not problems:
                if on_stage is not None:
                    on_stage(JobStatus.DRAFTED)
                try:
                    reviewed = self.reflective_review(draft)
                except ReviewOutputInvalid as exc:
                    problems.append(str(exc))
                else:
                    if on_stage is not None:
                        on_stage(JobStatus.REVIEWED)
                    violations = guardrail_scan(reviewed, self.lexicon)
                    if not violations:
                        return FeedbackResult(report=reviewed, attempts=attempts)
                    problems.extend(violations)
            bundle = with_corrections(base, [_describe_problem(p) for p in problems])
        raise RetriesExhausted(problems, attempts)


#: Built-in few-shot pair used by the service pipeline; the output half
#: validates as a feedback document and passes the guardrail scan.
DEFAULT_EXEMPLARS: tuple[Exemplar, ...] = (
    Exemplar(
        input=(
            "Role: Backend Developer\n"
            "Outcome: unsuccessful\n"
            "Skills:\n"
            "- Python (rating 6/10): solved the list deduplication task but mixed up "
            "set and dict semantics when asked about complexity\n"
            "- SQL (rating 7/10): wrote correct joins, hesitated on index choice\n"
            "Transcript:\n"
            "- interviewer: Can you walk me through your solution?\n"
            "- candidate: I used a dictionary to track seen values, then returned the keys."
        ),
        output=(
            '{"strengths": ['
            '{"title": "Solid SQL joins", "detail": "You wrote correct joins confidently '
            'and your query structure was easy to follow."}, '
            '{"title": "Working solution under time pressure", "detail": "You completed '
            'the deduplication task within the allotted time with a working approach."}], '
            '"areas_for_improvement": ['
            '{"title": "Data structure trade-offs", "detail": "You could have explained '
            'the complexity differences between sets and dictionaries more precisely when '
            'asked."}, '
            '{"title": "Index selection reasoning", "detail": "You could have walked '
            'through your index choice more decisively to show the reasoning behind it."}]}'
        ),
    ),
)
