"""Event-sourced store for negative-answer candidates.

State lives in an append-only event log (one JSON event per line); a
compacted snapshot accelerates loading but the log is never truncated, so
replaying it from empty always reconstructs the current state. All writes
funnel through one lock; timestamps appear only in log lines, never in
candidate state, keeping exported artifacts byte-stable.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import DataError
from .evalqa import NegativeCandidate, check_approvable, check_transition
from .render import write_jsonl

EVENTS_FILE = "events.log"
SNAPSHOT_FILE = "snapshot.jsonl"
SNAPSHOT_META_FILE = "snapshot.meta.json"

_EDITABLE_STATUSES = ("AwaitingReview",)


@dataclass
class StoreEvent:
    seq: int
    action: str
    candidate_id: str
    payload: dict = field(default_factory=dict)
    reviewer: str | None = None
    ts: float = 0.0

    def to_dict(self) -> dict:
        out = {"seq": self.seq, "action": self.action, "candidate_id": self.candidate_id, "payload": self.payload}
        if self.reviewer is not None:
            out["reviewer"] = self.reviewer
        out["ts"] = self.ts
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "StoreEvent":
        return cls(
            seq=d["seq"],
            action=d["action"],
            candidate_id=d["candidate_id"],
            payload=d.get("payload", {}),
            reviewer=d.get("reviewer"),
            ts=d.get("ts", 0.0),
        )


def apply_event(state: dict[str, NegativeCandidate], event: StoreEvent) -> None:
    """Fold one event into the candidate state (shared by store and replay)."""
    if event.action == "created":
        if event.candidate_id in state:
            raise DataError(f"candidate {event.candidate_id} already exists")
        state[event.candidate_id] = NegativeCandidate.from_dict(event.payload)
        return
    candidate = state.get(event.candidate_id)
    if candidate is None:
        raise DataError(f"event {event.seq} references unknown candidate {event.candidate_id}")
    if event.action == "status":
        check_transition(candidate.status, event.payload["status"])
        candidate.status = event.payload["status"]
        if "flags" in event.payload:
            candidate.filter_flags = set(event.payload["flags"])
    elif event.action == "corrected":
        check_transition(candidate.status, "Corrected")
        candidate.negative_answer = event.payload["negative_answer"]
        candidate.filter_flags = set(event.payload.get("flags", []))
        candidate.corrected = True
        candidate.status = "Corrected"
    elif event.action == "feedback_set":
        candidate.feedback = event.payload["feedback"]
        provenance = dict(candidate.provenance)
        for key in ("positive_statement", "feedback_model", "feedback_prompt_hash"):
            if key in event.payload:
                provenance[key] = event.payload[key]
        candidate.provenance = provenance
    elif event.action in ("edit_negative", "edit_feedback"):
        if candidate.status not in _EDITABLE_STATUSES:
            raise DataError(f"cannot edit candidate in status {candidate.status}")
        text = event.payload["text"]
        if not text.strip():
            raise DataError("edit payload must be non-empty")
        if event.action == "edit_negative":
            candidate.negative_answer = text
        else:
            candidate.feedback = text
        candidate.revision += 1
        candidate.human_edited = True
    elif event.action == "approve":
        check_transition(candidate.status, "Approved")
        check_approvable(candidate)
        candidate.status = "Approved"
        candidate.revision += 1
    elif event.action == "reject":
        check_transition(candidate.status, "Rejected")
        candidate.status = "Rejected"
        candidate.revision += 1
    else:
        raise DataError(f"unknown event action {event.action!r}")


def _copy(candidate: NegativeCandidate) -> NegativeCandidate:
    return replace(candidate, filter_flags=set(candidate.filter_flags), provenance=dict(candidate.provenance))


class CandidateStore:
    """Append-only candidate log with snapshot compaction."""

    def __init__(self, data_dir: str | Path):
        self.dir = Path(data_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        self._state: dict[str, NegativeCandidate] = {}
        self._last_seq = 0
        self._load()

    # -- loading -----------------------------------------------------------

    def _load(self) -> None:
        snapshot_seq = 0
        meta_path = self.dir / SNAPSHOT_META_FILE
        snap_path = self.dir / SNAPSHOT_FILE
        if meta_path.is_file() and snap_path.is_file():
            snapshot_seq = json.loads(meta_path.read_text(encoding="utf-8"))["last_seq"]
            with snap_path.open("r", encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        candidate = NegativeCandidate.from_dict(json.loads(line))
                        self._state[candidate.candidate_id] = candidate
            self._last_seq = snapshot_seq
        events_path = self.dir / EVENTS_FILE
        if events_path.is_file():
            with events_path.open("r", encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    event = StoreEvent.from_dict(json.loads(line))
                    if event.seq > snapshot_seq:
                        apply_event(self._state, event)
                    self._last_seq = max(self._last_seq, event.seq)

    # -- writing -----------------------------------------------------------

    def append(self, action: str, candidate_id: str, payload: dict | None = None, reviewer: str | None = None) -> StoreEvent:
        """Validate against current state, persist the event, then apply it."""
        with self._lock:
            event = StoreEvent(
                seq=self._last_seq + 1,
                action=action,
                candidate_id=candidate_id,
                payload=payload or {},
                reviewer=reviewer,
                ts=time.time(),
            )
            # Dry-run on copies first so a bad event never reaches the log.
            probe = dict(self._state)
            if candidate_id in probe:
                probe[candidate_id] = _copy(probe[candidate_id])
            apply_event(probe, event)
            with (self.dir / EVENTS_FILE).open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(event.to_dict(), ensure_ascii=False))
                fh.write("\n")
            apply_event(self._state, event)
            self._last_seq = event.seq
            return event

    def compact(self) -> int:
        """Write the snapshot files; the event log itself is kept whole."""
        with self._lock:
            rows = [self._state[cid].to_dict() for cid in sorted(self._state)]
            count = write_jsonl(rows, self.dir / SNAPSHOT_FILE)
            (self.dir / SNAPSHOT_META_FILE).write_text(
                json.dumps({"last_seq": self._last_seq}), encoding="utf-8"
            )
            return count

    # -- reading -----------------------------------------------------------

    def get(self, candidate_id: str) -> NegativeCandidate | None:
        with self._lock:
            candidate = self._state.get(candidate_id)
            return _copy(candidate) if candidate else None

    def candidates(self, status: str | None = None) -> list[NegativeCandidate]:
        """Snapshot-consistent copies in stable candidate_id order."""
        with self._lock:
            return [
                _copy(self._state[cid])
                for cid in sorted(self._state)
                if status is None or self._state[cid].status == status
            ]

    def __len__(self) -> int:
        with self._lock:
            return len(self._state)

    def events(self) -> list[StoreEvent]:
        path = self.dir / EVENTS_FILE
        if not path.is_file():
            return []
        with path.open("r", encoding="utf-8") as fh:
            return [StoreEvent.from_dict(json.loads(line)) for line in fh if line.strip()]

    def replay_from_log(self) -> dict[str, NegativeCandidate]:
        """Rebuild state purely from the event log (event-sourcing check)."""
        state: dict[str, NegativeCandidate] = {}
        for event in self.events():
            apply_event(state, event)
        return state

    def export_approved(self, path: str | Path) -> int:
        rows = [c.to_dict() for c in self.candidates(status="Approved")]
        return write_jsonl(rows, path)
