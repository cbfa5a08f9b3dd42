"""FAQ retrieval and candidate query routing.

Questions (never answers) are embedded into a linear-scan vector index;
incoming queries route through a cosine-similarity threshold gate and
either receive a grounded generated answer or escalate to a human queue.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from . import prompt_assets
from .domain import PromptBundle
from .gateway import CompletionRequest, Embedding, Gateway

ANSWER_SYSTEM_PROMPT = prompt_assets.load("faq_system.txt")
ANSWER_USER_TEMPLATE = prompt_assets.load("faq_user.txt")

DEFAULT_THRESHOLD = 0.75


class FaqError(Exception):
    """Base class for FAQ routing failures."""


class DimensionMismatch(FaqError):
    def __init__(self, left: int, right: int):
        super().__init__(f"embedding dimensions differ: {left} vs {right}")


class EmptyCorpus(FaqError):
    """Ingest was called with no records."""


class EmptyField(FaqError):
    def __init__(self, index: int, field: str):
        super().__init__(f"record {index}: {field} must be non-empty")
        self.index = index
        self.field = field


class EmptyQuestion(FaqError):
    """A query was empty after normalization."""


class EmptyLabelSet(FaqError):
    """A threshold sweep needs at least one labeled query."""


_TERMINAL_PUNCTUATION = ".!?"


def normalize_question(text: str) -> str:
    """Lowercase, collapse whitespace, and strip terminal punctuation."""
    collapsed = re.sub(r"\s+", " ", text.strip().lower())
    return collapsed.rstrip(_TERMINAL_PUNCTUATION).rstrip()


@dataclass(frozen=True)
class FaqEntry:
    """One FAQ record; the embedding covers the question text only."""

    faq_id: str
    question: str
    answer: str
    embedding: Embedding

    def __post_init__(self) -> None:
        if not self.question.strip():
            raise ValueError("question must be non-empty")
        if not self.answer.strip():
            raise ValueError("answer must be non-empty")


@dataclass(frozen=True)
class FaqIndex:
    """Immutable generation of the FAQ index.

    ``seed`` records the embedder seed that produced the vectors; it is
    provenance carried into snapshots, not used at query time.
    """

    entries: tuple[FaqEntry, ...]
    dimension: int
    threshold: float
    seed: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must be in [0, 1]")
        ids = [e.faq_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("faq_ids must be unique")
        for entry in self.entries:
            if entry.embedding.dimension != self.dimension:
                raise DimensionMismatch(entry.embedding.dimension, self.dimension)

    def __len__(self) -> int:
        return len(self.entries)

    def entry(self, faq_id: str) -> FaqEntry:
        for candidate in self.entries:
            if candidate.faq_id == faq_id:
                return candidate
        raise KeyError(faq_id)


@dataclass(frozen=True)
class IngestStats:
    count: int
    dimension: int
    duplicate_questions: tuple[str, ...]


@dataclass(frozen=True)
class Answered:
    """High-confidence resolution: a generated answer grounded in one FAQ."""

    answer_text: str
    matched_faq_id: str
    score: float


class EscalationReason(Enum):
    BELOW_THRESHOLD = "below_threshold"
    EMPTY_INDEX = "empty_index"


@dataclass(frozen=True)
class Escalated:
    """The query goes to the human queue instead of an automated answer."""

    reason: EscalationReason
    best_score: float | None = None


Resolution = Union[Answered, Escalated]


def cosine_similarity(a: Embedding, b: Embedding) -> float:
    """Cosine similarity of two embeddings; a plain dot product for unit vectors."""
    if a.dimension != b.dimension:
        raise DimensionMismatch(a.dimension, b.dimension)
    return float(np.dot(a.values, b.values))


def ingest(
    gateway: Gateway,
    records: Sequence[Mapping[str, str]],
    *,
    threshold: float = DEFAULT_THRESHOLD,
) -> tuple[FaqIndex, IngestStats]:
    """Build a new index generation from ``{"question", "answer"}`` records.

    Only question texts are embedded. Records whose normalized question
    was already seen are dropped (first occurrence wins) and reported in
    the stats. Raises :class:`EmptyCorpus` for an empty record list and
    :class:`EmptyField` for a blank question or answer.
    """
    if not records:
        raise EmptyCorpus("no FAQ records to ingest")
    entries: list[FaqEntry] = []
    seen: dict[str, str] = {}
    by_vector: dict[bytes, str] = {}
    duplicates: list[str] = []
    for index, record in enumerate(records):
        question = str(record.get("question", ""))
        answer = str(record.get("answer", ""))
        if not question.strip():
            raise EmptyField(index, "question")
        if not answer.strip():
            raise EmptyField(index, "answer")
        normalized = normalize_question(question)
        if not normalized:
            raise EmptyField(index, "question")
        if normalized in seen:
            duplicates.append(normalized)
            continue
        embedding = gateway.embed(normalized)
        key = embedding.values.tobytes()
        if key in by_vector and by_vector[key] != normalized:
            raise FaqError(
                f"embedding collision between distinct questions "
                f"{by_vector[key]!r} and {normalized!r}"
            )
        by_vector[key] = normalized
        seen[normalized] = question
        entries.append(
            FaqEntry(
                faq_id=f"faq-{len(entries):05d}",
                question=question,
                answer=answer,
                embedding=embedding,
            )
        )
    index_generation = FaqIndex(
        entries=tuple(entries),
        dimension=gateway.dimension,
        threshold=threshold,
        seed=getattr(gateway.embedder, "seed", None),
    )
    stats = IngestStats(
        count=len(entries),
        dimension=gateway.dimension,
        duplicate_questions=tuple(duplicates),
    )
    return index_generation, stats


def nearest(index: FaqIndex, query: Embedding, k: int) -> list[tuple[str, float]]:
    """The k highest-cosine entries, score descending, ties by ascending faq_id.

    Exhaustive linear scan; per-entry dot products keep scores
    bit-identical to a scalar oracle.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if index.entries and query.dimension != index.dimension:
        raise DimensionMismatch(query.dimension, index.dimension)
    scored = [(entry.faq_id, cosine_similarity(entry.embedding, query)) for entry in index.entries]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:k]


def resolve_query(
    index: FaqIndex,
    question_text: str,
    gateway: Gateway,
    *,
    temperature: float = 0.0,
) -> Resolution:
    """Route one candidate question through the threshold gate.

    The top-1 match at or above the index threshold yields a grounded
    completion; anything below escalates with the best score attached,
    and an empty index escalates outright.
    """
    normalized = normalize_question(question_text)
    if not normalized:
        raise EmptyQuestion("question must be non-empty")
    if not index.entries:
        return Escalated(reason=EscalationReason.EMPTY_INDEX)
    query = gateway.embed(normalized)
    faq_id, score = nearest(index, query, 1)[0]
    if score >= index.threshold:
        bundle = build_answer_prompt(index.entry(faq_id), question_text)
        answer_text = gateway.complete(CompletionRequest(bundle, temperature=temperature))
        return Answered(answer_text=answer_text, matched_faq_id=faq_id, score=score)
    return Escalated(reason=EscalationReason.BELOW_THRESHOLD, best_score=score)


def build_answer_prompt(entry: FaqEntry, question_text: str) -> PromptBundle:
    """Grounding bundle: the matched FAQ pair plus the candidate's question."""
    user = (
        ANSWER_USER_TEMPLATE.replace("{CANDIDATE_QUESTION}", question_text)
        .replace("{FAQ_QUESTION}", entry.question)
        .replace("{FAQ_ANSWER}", entry.answer)
    )
    return PromptBundle(system=ANSWER_SYSTEM_PROMPT, user=user)


@dataclass(frozen=True)
class LabeledQuery:
    """A query with the FAQ entry it should match, or None if unanswerable."""

    question: str
    expected_faq_id: str | None = None


@dataclass(frozen=True)
class ThresholdPoint:
    threshold: float
    deflection_rate: float
    precision: float
    answered_count: int


def sweep_threshold(
    index: FaqIndex,
    labeled: Sequence[LabeledQuery],
    thresholds: Sequence[float],
    gateway: Gateway,
) -> list[ThresholdPoint]:
    """Evaluate routing quality over a threshold grid.

    For each threshold: deflection_rate is the fraction of queries that
    would be answered, precision the fraction of answered queries whose
    match equals the label (vacuously 1.0 when nothing is answered).
    Only routing is evaluated; no completions are issued.
    """
    if not labeled:
        raise EmptyLabelSet("labeled query set must be non-empty")
    top_matches: list[tuple[str, float] | None] = []
    for query in labeled:
        normalized = normalize_question(query.question)
        if not normalized:
            raise EmptyQuestion(f"labeled query {query.question!r} is empty")
        if not index.entries:
            top_matches.append(None)
        else:
            top_matches.append(nearest(index, gateway.embed(normalized), 1)[0])

    points = []
    for threshold in thresholds:
        answered = 0
        correct = 0
        for query, match in zip(labeled, top_matches):
            if match is None or match[1] < threshold:
                continue
            answered += 1
            if query.expected_faq_id is not None and match[0] == query.expected_faq_id:
                correct += 1
        points.append(
            ThresholdPoint(
                threshold=threshold,
                deflection_rate=answered / len(labeled),
                precision=(correct / answered) if answered else 1.0,
                answered_count=answered,
            )
        )
    return points


def parse_corpus(text: str) -> list[dict[str, str]]:
    """Parse a JSON-lines corpus: one ``{"question", "answer"}`` object per line."""
    records = []
    for line_number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except ValueError as exc:
            raise FaqError(f"corpus line {line_number} is not valid JSON: {exc}") from None
        if not isinstance(record, dict) or "question" not in record or "answer" not in record:
            raise FaqError(f'corpus line {line_number} must be an object with "question" and "answer"')
        records.append({"question": str(record["question"]), "answer": str(record["answer"])})
    return records


def read_corpus(path: str | Path) -> list[dict[str, str]]:
    return parse_corpus(Path(path).read_text(encoding="utf-8"))


def save_index(index: FaqIndex, path: str | Path) -> None:
    """Persist an index generation as a JSON snapshot."""
    snapshot = {
        "dimension": index.dimension,
        "seed": index.seed,
        "threshold": index.threshold,
        "entries": [
            {
                "faq_id": e.faq_id,
                "question": e.question,
                "answer": e.answer,
                "embedding": e.embedding.values.tolist(),
            }
            for e in index.entries
        ],
    }
    Path(path).write_text(json.dumps(snapshot), encoding="utf-8")


def load_index(path: str | Path) -> FaqIndex:
    """Load a snapshot written by :func:`save_index`."""
    snapshot = json.loads(Path(path).read_text(encoding="utf-8"))
    entries = tuple(
        FaqEntry(
            faq_id=e["faq_id"],
            question=e["question"],
            answer=e["answer"],
            embedding=Embedding(np.asarray(e["embedding"], dtype=np.float64)),
        )
        for e in snapshot["entries"]
    )
    return FaqIndex(
        entries=entries,
        dimension=snapshot["dimension"],
        threshold=snapshot["threshold"],
        seed=snapshot.get("seed"),
    )
