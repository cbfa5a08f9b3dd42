"""Embedded record store: append-only event log plus snapshot.

A single writer serializes all mutations onto ``events.jsonl``; state is
rebuilt on open by loading ``snapshot.json`` (when present) and
replaying the tail of the log. The outbox lives in its own append-only
``outbox.jsonl`` so delivery tooling can tail it directly.
"""

from __future__ import annotations

import json
import logging
import threading
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from .analytics import QueryEvent
from .domain import FeedbackReport, InterviewReport, validate_feedback_document
from .feedback import FeedbackJob, JobStatus

logger = logging.getLogger(__name__)

EVENTS_FILE = "events.jsonl"
SNAPSHOT_FILE = "snapshot.json"
OUTBOX_FILE = "outbox.jsonl"

TICKET_OPEN = "open"
TICKET_ANSWERED = "answered_by_human"


class StoreError(Exception):
    pass


class DuplicateInterview(StoreError):
    pass


class UnknownRecord(StoreError):
    pass


@dataclass(frozen=True)
class OutboxMessage:
    """One email standing in the delivery queue."""

    message_id: str
    recipient: str
    subject: str
    body: str
    created_at: datetime
    delivered: bool = False

    def __post_init__(self) -> None:
        if not self.body.strip():
            raise ValueError("outbox body must be non-empty")


@dataclass(frozen=True)
class EscalationTicket:
    """A below-threshold query waiting for a human answer."""

    ticket_id: str
    question_text: str
    best_score: float | None
    created_at: datetime
    status: str = TICKET_OPEN


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def _read_jsonl(path: Path) -> list[dict[str, Any]]:
    """Read a JSON-lines file, tolerating a torn final line from a crash."""
    if not path.exists():
        return []
    records = []
    lines = path.read_text(encoding="utf-8").splitlines()
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except ValueError:
            if number == len(lines):
                logger.warning("dropping torn final line in %s", path)
                break
            raise StoreError(f"{path} line {number} is corrupt") from None
    return records


class RecordStore:
    """Single-writer store for interviews, jobs, tickets, ratings, and events.

    All mutating methods append one event line under a process-wide lock
    and update the in-memory state in the same step, so readers always
    see a consistent view and a reopened store replays to the same state.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        self._last_seq = 0

        self._interviews: dict[str, dict[str, Any]] = {}
        self._jobs: dict[str, FeedbackJob] = {}
        self._job_by_interview: dict[str, str] = {}
        self._tickets: dict[str, EscalationTicket] = {}
        self._query_events: list[dict[str, Any]] = []
        self._nps: list[dict[str, Any]] = []

        self._load()
        self._events_handle = (self.path / EVENTS_FILE).open("a", encoding="utf-8")
        self._outbox_handle = (self.path / OUTBOX_FILE).open("a", encoding="utf-8")

    # -- loading ---------------------------------------------------------

    def _load(self) -> None:
        snapshot_path = self.path / SNAPSHOT_FILE
        if snapshot_path.exists():
            snapshot = json.loads(snapshot_path.read_text(encoding="utf-8"))
            self._restore_snapshot(snapshot)
        for event in _read_jsonl(self.path / EVENTS_FILE):
            if event["seq"] > self._last_seq:
                self._apply(event["kind"], event["data"])
                self._last_seq = event["seq"]
        outbox_records = _read_jsonl(self.path / OUTBOX_FILE)
        self._outbox: list[OutboxMessage] = []
        delivered_ids = {r["mark_delivered"] for r in outbox_records if "mark_delivered" in r}
        for record in outbox_records:
            if "mark_delivered" in record:
                continue
            self._outbox.append(
                OutboxMessage(
                    message_id=record["message_id"],
                    recipient=record["recipient"],
                    subject=record["subject"],
                    body=record["body"],
                    created_at=datetime.fromisoformat(record["created_at"]),
                    delivered=record["message_id"] in delivered_ids,
                )
            )

    def _restore_snapshot(self, snapshot: dict[str, Any]) -> None:
        self._last_seq = snapshot["last_seq"]
        self._interviews = snapshot["interviews"]
        self._jobs = {
            job_id: self._job_from_dict(data) for job_id, data in snapshot["jobs"].items()
        }
        self._job_by_interview = {job.interview_id: job.job_id for job in self._jobs.values()}
        self._tickets = {
            ticket_id: EscalationTicket(
                ticket_id=ticket_id,
                question_text=data["question_text"],
                best_score=data["best_score"],
                created_at=datetime.fromisoformat(data["created_at"]),
                status=data["status"],
            )
            for ticket_id, data in snapshot["tickets"].items()
        }
        self._query_events = snapshot["query_events"]
        self._nps = snapshot["nps"]

    # -- event machinery -------------------------------------------------

    def _append(self, kind: str, data: dict[str, Any]) -> None:
        self._last_seq += 1
        line = json.dumps({"seq": self._last_seq, "kind": kind, "data": data}, ensure_ascii=False)
        self._events_handle.write(line + "\n")
        self._events_handle.flush()
        self._apply(kind, data)

    def _apply(self, kind: str, data: dict[str, Any]) -> None:
        if kind == "interview_added":
            self._interviews[data["report"]["interview_id"]] = data
        elif kind == "job_created":
            job = FeedbackJob(job_id=data["job_id"], interview_id=data["interview_id"])
            self._jobs[job.job_id] = job
            self._job_by_interview[job.interview_id] = job.job_id
        elif kind == "job_updated":
            self._jobs[data["job_id"]] = self._job_from_dict(data)
        elif kind == "ticket_opened":
            ticket = EscalationTicket(
                ticket_id=data["ticket_id"],
                question_text=data["question_text"],
                best_score=data["best_score"],
                created_at=datetime.fromisoformat(data["created_at"]),
            )
            self._tickets[ticket.ticket_id] = ticket
        elif kind == "ticket_answered":
            ticket = self._tickets[data["ticket_id"]]
            self._tickets[ticket.ticket_id] = EscalationTicket(
                ticket_id=ticket.ticket_id,
                question_text=ticket.question_text,
                best_score=ticket.best_score,
                created_at=ticket.created_at,
                status=TICKET_ANSWERED,
            )
        elif kind == "query_recorded":
            self._query_events.append(data)
        elif kind == "nps_recorded":
            self._nps.append(data)
        else:
            raise StoreError(f"unknown event kind {kind!r}")

    @staticmethod
    def _job_from_dict(data: dict[str, Any]) -> FeedbackJob:
        result = data.get("result")
        return FeedbackJob(
            job_id=data["job_id"],
            interview_id=data["interview_id"],
            status=JobStatus(data["status"]),
            attempts=data["attempts"],
            result=validate_feedback_document(json.dumps(result)) if result else None,
        )

    @staticmethod
    def _job_to_dict(job: FeedbackJob) -> dict[str, Any]:
        return {
            "job_id": job.job_id,
            "interview_id": job.interview_id,
            "status": job.status.value,
            "attempts": job.attempts,
            "result": job.result.to_dict() if job.result else None,
        }

    # -- interviews ------------------------------------------------------

    def add_interview(self, report: InterviewReport, candidate_email: str) -> None:
        with self._lock:
            if report.interview_id in self._interviews:
                raise DuplicateInterview(report.interview_id)
            self._append(
                "interview_added",
                {"report": report.to_dict(), "candidate_email": candidate_email},
            )

    def get_interview(self, interview_id: str) -> tuple[InterviewReport, str] | None:
        with self._lock:
            data = self._interviews.get(interview_id)
        if data is None:
            return None
        return InterviewReport.from_dict(data["report"]), data["candidate_email"]

    def list_interviews(self) -> list[dict[str, Any]]:
        with self._lock:
            summaries = []
            for data in self._interviews.values():
                report = data["report"]
                summaries.append(
                    {
                        "interview_id": report["interview_id"],
                        "role_title": report["role_title"],
                        "outcome": report["outcome"],
                        "created_at": report["created_at"],
                        "job_id": self._job_by_interview.get(report["interview_id"]),
                    }
                )
            return summaries

    def unsuccessful_interview_count(self) -> int:
        with self._lock:
            return sum(
                1 for d in self._interviews.values() if d["report"]["outcome"] == "unsuccessful"
            )

    # -- feedback jobs ---------------------------------------------------

    def create_job(self, interview_id: str) -> FeedbackJob:
        with self._lock:
            existing = self._job_by_interview.get(interview_id)
            if existing is not None:
                return self._jobs[existing]
            job_id = f"job-{uuid.uuid4().hex[:12]}"
            self._append("job_created", {"job_id": job_id, "interview_id": interview_id})
            return self._jobs[job_id]

    def job(self, job_id: str) -> FeedbackJob | None:
        with self._lock:
            return self._jobs.get(job_id)

    def job_for_interview(self, interview_id: str) -> FeedbackJob | None:
        with self._lock:
            job_id = self._job_by_interview.get(interview_id)
            return self._jobs[job_id] if job_id else None

    def update_job(
        self,
        job_id: str,
        *,
        status: JobStatus | None = None,
        attempts: int | None = None,
        result: FeedbackReport | None = None,
    ) -> FeedbackJob:
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None:
                raise UnknownRecord(job_id)
            updated = FeedbackJob(
                job_id=job.job_id,
                interview_id=job.interview_id,
                status=status if status is not None else job.status,
                attempts=attempts if attempts is not None else job.attempts,
                result=result if result is not None else job.result,
            )
            self._append("job_updated", self._job_to_dict(updated))
            return updated

    def feedback_request_count(self) -> int:
        with self._lock:
            return len(self._jobs)

    def jobs(self) -> list[FeedbackJob]:
        with self._lock:
            return list(self._jobs.values())

    # -- outbox ----------------------------------------------------------

    def append_outbox(self, recipient: str, subject: str, body: str) -> OutboxMessage:
        with self._lock:
            message = OutboxMessage(
                message_id=f"msg-{len(self._outbox) + 1:05d}",
                recipient=recipient,
                subject=subject,
                body=body,
                created_at=datetime.now(timezone.utc),
            )
            record = {
                "message_id": message.message_id,
                "recipient": message.recipient,
                "subject": message.subject,
                "body": message.body,
                "created_at": message.created_at.isoformat(),
            }
            self._outbox_handle.write(json.dumps(record, ensure_ascii=False) + "\n")
            self._outbox_handle.flush()
            self._outbox.append(message)
            return message

    def mark_delivered(self, message_id: str) -> None:
        with self._lock:
            for position, message in enumerate(self._outbox):
                if message.message_id == message_id:
                    self._outbox_handle.write(json.dumps({"mark_delivered": message_id}) + "\n")
                    self._outbox_handle.flush()
                    self._outbox[position] = OutboxMessage(
                        message_id=message.message_id,
                        recipient=message.recipient,
                        subject=message.subject,
                        body=message.body,
                        created_at=message.created_at,
                        delivered=True,
                    )
                    return
            raise UnknownRecord(message_id)

    def outbox_messages(self) -> list[OutboxMessage]:
        with self._lock:
            return list(self._outbox)

    # -- tickets ---------------------------------------------------------

    def open_ticket(self, question_text: str, best_score: float | None) -> EscalationTicket:
        with self._lock:
            ticket_id = f"ticket-{len(self._tickets) + 1:05d}"
            self._append(
                "ticket_opened",
                {
                    "ticket_id": ticket_id,
                    "question_text": question_text,
                    "best_score": best_score,
                    "created_at": _now_iso(),
                },
            )
            return self._tickets[ticket_id]

    def answer_ticket(self, ticket_id: str) -> EscalationTicket:
        with self._lock:
            if ticket_id not in self._tickets:
                raise UnknownRecord(ticket_id)
            self._append("ticket_answered", {"ticket_id": ticket_id})
            return self._tickets[ticket_id]

    def tickets(self) -> list[EscalationTicket]:
        with self._lock:
            return list(self._tickets.values())

    def open_ticket_count(self) -> int:
        with self._lock:
            return sum(1 for t in self._tickets.values() if t.status == TICKET_OPEN)

    # -- query events and ratings ---------------------------------------

    def add_query_event(self, resolved: bool, score: float | None = None) -> None:
        with self._lock:
            self._append(
                "query_recorded",
                {"timestamp": _now_iso(), "resolved": resolved, "score": score},
            )

    def query_events(self) -> list[QueryEvent]:
        with self._lock:
            return [
                QueryEvent(timestamp=datetime.fromisoformat(e["timestamp"]), resolved=e["resolved"])
                for e in self._query_events
            ]

    def add_nps(self, interview_id: str, rating: int) -> None:
        if not isinstance(rating, int) or not 1 <= rating <= 5:
            raise ValueError(f"rating must be an integer in [1, 5], got {rating!r}")
        with self._lock:
            self._append(
                "nps_recorded",
                {"interview_id": interview_id, "rating": rating, "timestamp": _now_iso()},
            )

    def nps_ratings(self) -> list[int]:
        with self._lock:
            return [record["rating"] for record in self._nps]

    # -- lifecycle -------------------------------------------------------

    def write_snapshot(self) -> None:
        """Compact current state into ``snapshot.json``; the log stays intact."""
        with self._lock:
            snapshot = {
                "last_seq": self._last_seq,
                "interviews": self._interviews,
                "jobs": {job_id: self._job_to_dict(job) for job_id, job in self._jobs.items()},
                "tickets": {
                    t.ticket_id: {
                        "question_text": t.question_text,
                        "best_score": t.best_score,
                        "created_at": t.created_at.isoformat(),
                        "status": t.status,
                    }
                    for t in self._tickets.values()
                },
                "query_events": self._query_events,
                "nps": self._nps,
            }
            tmp = self.path / (SNAPSHOT_FILE + ".tmp")
            tmp.write_text(json.dumps(snapshot, ensure_ascii=False), encoding="utf-8")
            tmp.replace(self.path / SNAPSHOT_FILE)

    def close(self) -> None:
        with self._lock:
            self.write_snapshot()
            self._events_handle.close()
            self._outbox_handle.close()
