"""Batch job lifecycle: states, legal transitions, persisted snapshots.

Jobs move Queued -> Extracting -> Parsing -> Inferring -> Done, with
Failed reachable from any non-terminal state. Every mutation republishes
an immutable snapshot dict (what status reads return) and persists it as
``{batch_id}/job.json`` so the service can recover after a restart.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum

from .store import LocalFsStore


class BatchState(str, Enum):
    QUEUED = "Queued"
    EXTRACTING = "Extracting"
    PARSING = "Parsing"
    INFERRING = "Inferring"
    DONE = "Done"
    FAILED = "Failed"


_NEXT = {
    BatchState.QUEUED: {BatchState.EXTRACTING, BatchState.FAILED},
    BatchState.EXTRACTING: {BatchState.PARSING, BatchState.FAILED},
    BatchState.PARSING: {BatchState.INFERRING, BatchState.FAILED},
    BatchState.INFERRING: {BatchState.DONE, BatchState.FAILED},
    BatchState.DONE: set(),
    BatchState.FAILED: set(),
}

TERMINAL_STATES = {BatchState.DONE, BatchState.FAILED}


class JobError(Exception):
    pass


class IllegalTransition(JobError):
    pass


class NotFound(JobError):
    pass


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


@dataclass
class DocStatus:
    name: str
    doc_id: str
    status: str = "pending"  # pending | ok | failed
    error: str | None = None


@dataclass
class BatchJob:
    batch_id: str
    question_ids: list[int]
    docs: list[DocStatus]
    state: BatchState = BatchState.QUEUED
    created_at: str = field(default_factory=_now)
    updated_at: str = field(default_factory=_now)
    error: str | None = None

    def advance(self, new_state: BatchState, error: str | None = None) -> None:
        if new_state == self.state:
            return
        if new_state not in _NEXT[self.state]:
            raise IllegalTransition(f"{self.state.value} -> {new_state.value}")
        self.state = new_state
        self.updated_at = _now()
        if error is not None:
            self.error = error

    def snapshot(self) -> dict:
        return {
            "batch_id": self.batch_id,
            "state": self.state.value,
            "question_ids": list(self.question_ids),
            "docs": [
                {"name": d.name, "doc_id": d.doc_id, "status": d.status, "error": d.error}
                for d in self.docs
            ],
            "created_at": self.created_at,
            "updated_at": self.updated_at,
            "error": self.error,
        }

    @classmethod
    def from_snapshot(cls, snap: dict) -> "BatchJob":
        return cls(
            batch_id=snap["batch_id"],
            question_ids=list(snap["question_ids"]),
            docs=[DocStatus(**d) for d in snap["docs"]],
            state=BatchState(snap["state"]),
            created_at=snap["created_at"],
            updated_at=snap["updated_at"],
            error=snap.get("error"),
        )


class JobStore:
    """In-memory snapshot registry backed by job.json objects in the store."""

    def __init__(self, store: LocalFsStore):
        self.store = store
        self._snapshots: dict[str, dict] = {}
        self._lock = threading.Lock()
        self._load_existing()

    def _key(self, batch_id: str) -> str:
        return f"{batch_id}/job.json"

    def _load_existing(self) -> None:
        for batch_id in self.store.list_prefixes():
            try:
                snap = json.loads(self.store.get(self._key(batch_id)).decode("utf-8"))
                self._snapshots[batch_id] = snap
            except (KeyError, ValueError):
                continue

    def publish(self, job: BatchJob) -> None:
        snap = job.snapshot()
        self.store.put(self._key(job.batch_id), json.dumps(snap, indent=1).encode("utf-8"))
        with self._lock:
            self._snapshots[job.batch_id] = snap

    def get_snapshot(self, batch_id: str) -> dict:
        snap = self._snapshots.get(batch_id)
        if snap is None:
            raise NotFound(batch_id)
        return snap

    def load_job(self, batch_id: str) -> BatchJob:
        return BatchJob.from_snapshot(self.get_snapshot(batch_id))

    def exists(self, batch_id: str) -> bool:
        return batch_id in self._snapshots

    def unfinished(self) -> list[str]:
        """Batch ids whose persisted state is non-terminal (for recovery)."""
        with self._lock:
            return sorted(
                batch_id for batch_id, snap in self._snapshots.items()
                if BatchState(snap["state"]) not in TERMINAL_STATES
            )
