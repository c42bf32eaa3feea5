"""Append-only audit store and the decision state machine.

Every mutation is a JSON record appended (and fsynced) to the log before it
is acknowledged; replaying the log from the start reconstructs the exact
in-memory state.  The first line is a schema header.

Item life cycle: pending -> one_decision -> {resolved | conflicted}; a
conflicted item resolves when a later decision matches an earlier one, or
through an explicit override after three mutually different decisions.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Sequence

from ..corpus import (
    CorpusError,
    NER_LABELS,
    validate_tag_sequence,
)

SCHEMA_HEADER = {"schema": "nerforge-audit-log", "version": 1}

STATUSES = ("pending", "one_decision", "conflicted", "resolved")


class AuditError(Exception):
    code = "AuditError"


class InvalidTagsError(AuditError):
    code = "InvalidTags"


class DuplicateAuditorError(AuditError):
    code = "DuplicateAuditor"


class AlreadyResolvedError(AuditError):
    code = "AlreadyResolved"


class UnknownItemError(AuditError):
    code = "UnknownItem"


class VersionConflictError(AuditError):
    code = "VersionConflict"


def coerce_tags(tags: Sequence, length: int) -> tuple[int, ...]:
    """Validate wire tags (label strings or indices) into a BIO2 index tuple."""
    out: list[int] = []
    for tag in tags:
        if isinstance(tag, str):
            if tag not in NER_LABELS:
                raise InvalidTagsError(f"unknown label {tag!r}")
            out.append(NER_LABELS.index(tag))
        elif isinstance(tag, int) and 0 <= tag < len(NER_LABELS):
            out.append(tag)
        else:
            raise InvalidTagsError(f"bad tag value {tag!r}")
    if len(out) != length:
        raise InvalidTagsError(f"expected {length} tags, got {len(out)}")
    try:
        validate_tag_sequence(out)
    except CorpusError as exc:
        raise InvalidTagsError(str(exc)) from exc
    return tuple(out)


@dataclass
class AuditDecision:
    auditor_id: str
    tags: tuple[int, ...]
    ts: float

    def to_record(self) -> dict:
        return {
            "auditor_id": self.auditor_id,
            "tags": [NER_LABELS[t] for t in self.tags],
            "ts": self.ts,
        }


@dataclass
class AuditItem:
    item_id: str
    sentence_id: str
    tokens: tuple[str, ...]
    stored_tags: tuple[int, ...]
    predicted_tags: tuple[int, ...]
    status: str = "pending"
    decisions: list[AuditDecision] = field(default_factory=list)
    resolution: tuple[int, ...] | None = None
    version: int = 0

    @property
    def escalated(self) -> bool:
        return self.status == "conflicted" and len(self.decisions) >= 3

    def disagreement_count(self) -> int:
        return sum(1 for a, b in zip(self.stored_tags, self.predicted_tags) if a != b)

    def summary(self) -> dict:
        preview = " ".join(self.tokens[:8])
        if len(self.tokens) > 8:
            preview += " …"
        return {
            "item_id": self.item_id,
            "sentence_id": self.sentence_id,
            "status": self.status,
            "version": self.version,
            "preview": preview,
            "disagreement_count": self.disagreement_count(),
        }

    def to_record(self) -> dict:
        return {
            "item_id": self.item_id,
            "sentence_id": self.sentence_id,
            "tokens": list(self.tokens),
            "stored_tags": [NER_LABELS[t] for t in self.stored_tags],
            "predicted_tags": [NER_LABELS[t] for t in self.predicted_tags],
            "status": self.status,
            "version": self.version,
            "decisions": [d.to_record() for d in self.decisions],
            "resolution": None if self.resolution is None else [NER_LABELS[t] for t in self.resolution],
            "escalated": self.escalated,
        }


class AuditStore:
    """In-memory item state backed by an append-only JSON-lines log.

    ``path=None`` keeps the store purely in memory (used heavily by tests);
    otherwise the log is replayed on open and extended in place.
    """

    def __init__(self, path: str | Path | None = None):
        self._items: dict[str, AuditItem] = {}
        self._by_sentence: dict[str, list[str]] = {}
        self._reports: list[dict] = []
        self._events: list[dict] = []
        self._lock = threading.RLock()
        self._fh: IO[str] | None = None
        self.path = Path(path) if path is not None else None
        if self.path is not None:
            if self.path.exists():
                self._replay_file(self.path)
            self._fh = open(self.path, "a", encoding="utf-8")
            if self.path.stat().st_size == 0:
                self._write_line(SCHEMA_HEADER)

    # -- persistence ---------------------------------------------------
    def _write_line(self, record: dict) -> None:
        assert self._fh is not None
        self._fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def _replay_file(self, path: Path) -> None:
        with open(path, encoding="utf-8") as fh:
            first = fh.readline()
            if not first:
                return
            header = json.loads(first)
            if header.get("schema") != SCHEMA_HEADER["schema"]:
                raise AuditError(f"not an audit log: {path}")
            if header.get("version") != SCHEMA_HEADER["version"]:
                raise AuditError(f"unsupported audit log version {header.get('version')}")
            for line in fh:
                line = line.strip()
                if line:
                    self._apply(json.loads(line))

    def _commit(self, event: dict) -> None:
        """Durably append, then apply; acknowledgment happens after both."""
        if self._fh is not None:
            self._write_line(event)
        self._apply(event)

    # -- event application (shared by live calls and replay) -------------
    def _apply(self, event: dict) -> None:
        kind = event["event"]
        if kind == "enqueue":
            item = AuditItem(
                item_id=event["item_id"],
                sentence_id=event["sentence_id"],
                tokens=tuple(event["tokens"]),
                stored_tags=tuple(NER_LABELS.index(t) for t in event["stored_tags"]),
                predicted_tags=tuple(NER_LABELS.index(t) for t in event["predicted_tags"]),
            )
            self._items[item.item_id] = item
            self._by_sentence.setdefault(item.sentence_id, []).append(item.item_id)
        elif kind == "decision":
            item = self._items[event["item_id"]]
            tags = tuple(NER_LABELS.index(t) for t in event["tags"])
            item.decisions.append(AuditDecision(event["auditor_id"], tags, event["ts"]))
            self._advance(item)
            item.version += 1
        elif kind == "override":
            item = self._items[event["item_id"]]
            item.resolution = tuple(NER_LABELS.index(t) for t in event["tags"])
            item.status = "resolved"
            item.version += 1
        elif kind == "iteration_report":
            self._reports.append(event["report"])
        else:
            raise AuditError(f"unknown event kind {kind!r}")
        self._events.append(event)

    @staticmethod
    def _advance(item: AuditItem) -> None:
        """Recompute status from the decision list (pure, order-dependent)."""
        decisions = item.decisions
        for i in range(len(decisions)):
            for j in range(i + 1, len(decisions)):
                if decisions[i].tags == decisions[j].tags:
                    item.status = "resolved"
                    item.resolution = decisions[i].tags
                    return
        item.status = "pending" if not decisions else (
            "one_decision" if len(decisions) == 1 else "conflicted"
        )

    # -- public API ------------------------------------------------------
    def enqueue(
        self,
        sentence_id: str,
        tokens: Sequence[str],
        stored_tags: Sequence[int],
        predicted_tags: Sequence[int],
    ) -> AuditItem:
        with self._lock:
            item_id = f"item-{len(self._items):06d}"
            event = {
                "event": "enqueue",
                "item_id": item_id,
                "sentence_id": sentence_id,
                "tokens": list(tokens),
                "stored_tags": [NER_LABELS[t] for t in stored_tags],
                "predicted_tags": [NER_LABELS[t] for t in predicted_tags],
                "ts": time.time(),
            }
            self._commit(event)
            return self._items[item_id]

    def get(self, item_id: str) -> AuditItem:
        with self._lock:
            try:
                return self._items[item_id]
            except KeyError:
                raise UnknownItemError(f"no item {item_id!r}") from None

    def items(self, status: str | None = None) -> list[AuditItem]:
        with self._lock:
            if status is None:
                return list(self._items.values())
            if status not in STATUSES:
                raise ValueError(f"unknown status {status!r}")
            return [i for i in self._items.values() if i.status == status]

    def items_for_sentence(self, sentence_id: str) -> list[AuditItem]:
        with self._lock:
            return [self._items[i] for i in self._by_sentence.get(sentence_id, [])]

    def record_decision(
        self,
        item_id: str,
        auditor_id: str,
        tags: Sequence,
        expected_version: int | None = None,
    ) -> AuditItem:
        with self._lock:
            item = self.get(item_id)
            if expected_version is not None and expected_version != item.version:
                raise VersionConflictError(
                    f"item {item_id} is at version {item.version}, not {expected_version}"
                )
            if item.status == "resolved":
                raise AlreadyResolvedError(f"item {item_id} is already resolved")
            if not auditor_id or not isinstance(auditor_id, str):
                raise AuditError("auditor_id must be a non-empty string")
            if any(d.auditor_id == auditor_id for d in item.decisions):
                raise DuplicateAuditorError(f"{auditor_id!r} already decided {item_id}")
            coerced = coerce_tags(tags, len(item.tokens))
            event = {
                "event": "decision",
                "item_id": item_id,
                "auditor_id": auditor_id,
                "tags": [NER_LABELS[t] for t in coerced],
                "ts": time.time(),
            }
            self._commit(event)
            return item

    def override_resolution(self, item_id: str, tags: Sequence) -> AuditItem:
        """Manual escalation path for items where all three decisions differ."""
        with self._lock:
            item = self.get(item_id)
            if item.status == "resolved":
                raise AlreadyResolvedError(f"item {item_id} is already resolved")
            if not item.escalated:
                raise AuditError("override is only allowed for escalated conflicted items")
            coerced = coerce_tags(tags, len(item.tokens))
            event = {
                "event": "override",
                "item_id": item_id,
                "tags": [NER_LABELS[t] for t in coerced],
                "ts": time.time(),
            }
            self._commit(event)
            return item

    def append_report(self, report: dict) -> None:
        with self._lock:
            self._commit({"event": "iteration_report", "report": report, "ts": time.time()})

    @property
    def reports(self) -> list[dict]:
        with self._lock:
            return list(self._reports)

    def events(self) -> list[dict]:
        with self._lock:
            return [dict(e) for e in self._events]

    def replay_clone(self) -> "AuditStore":
        """A fresh store rebuilt only from this store's event history."""
        clone = AuditStore(path=None)
        for event in self.events():
            clone._apply(event)
        return clone

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None
