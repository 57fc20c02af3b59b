"""Durable at-least-once job queue with a file-backed append log.

Every state transition (enqueue, deliver, ack, nack, lease expiry) is one
length-prefixed JSON record appended and fsynced before the call returns, so
any process can rebuild the exact queue state by replaying the log. Mutating
operations take an exclusive ``flock`` on the log and first apply records
appended by other processes, which makes one log safely shareable between a
producer process and worker processes. A partially written trailing record
(crash mid-append) is ignored on replay and truncated by the next append.

Delivery contract: a dequeued message is leased; without an ack or nack
before the lease deadline it is redelivered with ``attempt + 1``, and a
message whose next attempt would exceed ``max_attempts`` is parked in the
dead-letter list. Re-enqueueing a job_id that was ever seen is a no-op, which
lets crashed producers retry blindly.
"""
from __future__ import annotations

import fcntl
import json
import os
import struct
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import SomnolineError

SCHEMA_VERSION = 1
KIND_SPLIT = "split"
KIND_PROCESS = "process"
DEFAULT_MAX_ATTEMPTS = 3
DEFAULT_LEASE_S = 600.0

_LEN = struct.Struct(">I")


class StorageFailure(SomnolineError):
    """The durable log could not be written."""


class UnknownJob(SomnolineError):
    """ack/nack for a job_id that is not in flight."""


@dataclass(frozen=True)
class JobMessage:
    job_id: str
    kind: str
    recording_ref: str
    night_index: int | None = None
    attempt: int = 1
    enqueued_at: float = field(default_factory=time.time)

    def __post_init__(self):
        if self.kind not in (KIND_SPLIT, KIND_PROCESS):
            raise SomnolineError(f"unknown job kind {self.kind!r}")
        if self.kind == KIND_PROCESS and self.night_index is None:
            raise SomnolineError("process jobs require a night_index")
        if self.attempt < 1:
            raise SomnolineError("attempt starts at 1")
        if not self.job_id:
            raise SomnolineError("job_id must be non-empty")

    def to_json(self) -> dict:
        return {
            "v": SCHEMA_VERSION,
            "job_id": self.job_id,
            "kind": self.kind,
            "recording_ref": self.recording_ref,
            "night_index": self.night_index,
            "attempt": self.attempt,
            "enqueued_at": self.enqueued_at,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "JobMessage":
        if doc.get("v") != SCHEMA_VERSION:
            raise SomnolineError(f"unsupported message schema version {doc.get('v')!r}")
        return cls(
            job_id=doc["job_id"],
            kind=doc["kind"],
            recording_ref=doc["recording_ref"],
            night_index=doc["night_index"],
            attempt=doc["attempt"],
            enqueued_at=doc["enqueued_at"],
        )


@dataclass(frozen=True)
class QueueStats:
    pending: int
    in_flight: int
    dead_letter: int


class DurableQueue:
    """One durable FIFO queue backed by a transition log file."""

    def __init__(self, path: str | Path, max_attempts: int = DEFAULT_MAX_ATTEMPTS):
        self.path = Path(path)
        self.max_attempts = max_attempts
        self._lock = threading.RLock()
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._file = open(self.path, "a+b")
        self._offset = 0
        self._pending: dict[str, JobMessage] = {}
        self._in_flight: dict[str, tuple[JobMessage, float]] = {}
        self._dead: dict[str, JobMessage] = {}
        self._seen: set[str] = set()
        with self._exclusive():
            pass  # initial replay happens inside the lock

    def close(self) -> None:
        self._file.close()

    # -- locking and log I/O --

    def _exclusive(self):
        return _LogSection(self)

    def _replay_new(self) -> None:
        self._file.seek(0, os.SEEK_END)
        end = self._file.tell()
        while self._offset < end:
            self._file.seek(self._offset)
            head = self._file.read(_LEN.size)
            if len(head) < _LEN.size:
                return  # partial trailing record
            (length,) = _LEN.unpack(head)
            payload = self._file.read(length)
            if len(payload) < length:
                return
            self._apply(json.loads(payload.decode("utf-8")))
            self._offset += _LEN.size + length

    def _append(self, record: dict) -> None:
        payload = json.dumps(record, separators=(",", ":")).encode("utf-8")
        try:
            self._file.seek(self._offset)
            self._file.truncate()
            self._file.write(_LEN.pack(len(payload)) + payload)
            self._file.flush()
            os.fsync(self._file.fileno())
        except OSError as exc:
            raise StorageFailure(f"cannot append to queue log: {exc}") from exc
        self._offset = self._file.tell()

    def _apply(self, record: dict) -> None:
        op = record["op"]
        if op == "enq":
            msg = JobMessage.from_json(record["msg"])
            if msg.job_id not in self._seen:
                self._seen.add(msg.job_id)
                self._pending[msg.job_id] = msg
        elif op == "dlv":
            msg = self._pending.pop(record["id"], None)
            if msg is not None:
                self._in_flight[msg.job_id] = (msg, record["deadline"])
        elif op == "ack":
            self._in_flight.pop(record["id"], None)
        elif op in ("nack", "exp"):
            entry = self._in_flight.pop(record["id"], None)
            if entry is not None:
                self._route_retry(entry[0])

    def _route_retry(self, msg: JobMessage) -> None:
        if msg.attempt + 1 > self.max_attempts:
            self._dead[msg.job_id] = msg
        else:
            self._pending[msg.job_id] = replace(msg, attempt=msg.attempt + 1)

    def _sweep_expired(self, now: float) -> None:
        expired = [jid for jid, (_, deadline) in self._in_flight.items() if deadline <= now]
        for jid in expired:
            self._append({"op": "exp", "id": jid})
            msg, _ = self._in_flight.pop(jid)
            self._route_retry(msg)

    # -- public operations --

    def enqueue(self, msg: JobMessage) -> None:
        """Durably append; returns only after the message is persisted.

        A job_id that was ever enqueued before is dropped silently, making
        producer retries after a crash idempotent.
        """
        with self._exclusive():
            if msg.job_id in self._seen:
                return
            self._append({"op": "enq", "msg": msg.to_json()})
            self._seen.add(msg.job_id)
            self._pending[msg.job_id] = msg

    def dequeue(self, lease_s: float = DEFAULT_LEASE_S) -> JobMessage | None:
        with self._exclusive():
            now = time.time()
            self._sweep_expired(now)
            if not self._pending:
                return None
            job_id = next(iter(self._pending))
            msg = self._pending[job_id]
            deadline = now + lease_s
            self._append({"op": "dlv", "id": job_id, "deadline": deadline})
            del self._pending[job_id]
            self._in_flight[job_id] = (msg, deadline)
            return msg

    def ack(self, job_id: str) -> None:
        with self._exclusive():
            if job_id not in self._in_flight:
                raise UnknownJob(f"job {job_id!r} is not in flight")
            self._append({"op": "ack", "id": job_id})
            del self._in_flight[job_id]

    def nack(self, job_id: str) -> None:
        with self._exclusive():
            if job_id not in self._in_flight:
                raise UnknownJob(f"job {job_id!r} is not in flight")
            self._append({"op": "nack", "id": job_id})
            msg, _ = self._in_flight.pop(job_id)
            self._route_retry(msg)

    def stats(self) -> QueueStats:
        with self._exclusive():
            self._sweep_expired(time.time())
            return QueueStats(
                pending=len(self._pending),
                in_flight=len(self._in_flight),
                dead_letter=len(self._dead),
            )

    def dead_letters(self) -> list[JobMessage]:
        with self._exclusive():
            return list(self._dead.values())


class _LogSection:
    """threading lock + flock + replay of records from other processes."""

    def __init__(self, queue: DurableQueue):
        self._queue = queue

    def __enter__(self):
        self._queue._lock.acquire()
        fcntl.flock(self._queue._file.fileno(), fcntl.LOCK_EX)
        self._queue._replay_new()
        return self._queue

    def __exit__(self, *exc):
        fcntl.flock(self._queue._file.fileno(), fcntl.LOCK_UN)
        self._queue._lock.release()
        return False
