"""Splitter and processor worker loops plus the shared filesystem storage.

Workers pull from a durable queue, do their work, signal the front end, and
only then ack; any exception nacks the job so poison inputs retire to the
dead-letter list after the retry budget without stopping the loop. All
outputs are written to deterministic paths derived from (recording, night),
so re-execution after a crash overwrites identical content instead of
duplicating it.

Storage layout::

    uploads/<recording_id>.edf                      original upload
    uploads/<recording_id>.edf.nights.json          optional sidecar manifest
    recordings/<rid>/night_<i>.edf                  split nights
    recordings/<rid>/night_<i>/scoring/night.edf    human scoring bundle
    recordings/<rid>/night_<i>/scoring/labels.csv
    recordings/<rid>/night_<i>/ml/night.edf         machine bundle
    recordings/<rid>/night_<i>/ml/hypnodensity.csv
    recordings/<rid>/night_<i>/ml/gray_mask.csv
"""
from __future__ import annotations

import logging
import os
import tempfile
import threading
from pathlib import Path, PurePosixPath
from typing import Callable

import httpx

from .edf import (
    DEFAULT_GAP_THRESHOLD_S,
    detect_night_boundaries,
    parse_nights_manifest,
    read_recording,
    split_nights,
    write_recording,
)
from .errors import SomnolineError
from .gray import (
    DEFAULT_GRAY_THRESHOLD,
    apply_mask,
    certainty,
    gray_mask_to_csv,
    tag_gray,
)
from .queueing import (
    DEFAULT_LEASE_S,
    KIND_PROCESS,
    DurableQueue,
    JobMessage,
    UnknownJob,
)
from .scoring import ScorerKind, ScorerSpec, score
from .staging import (
    DEFAULT_EPOCH_LENGTH_S,
    encode_scoring_labels,
    hypnodensity_to_csv,
    hypnodensity_to_hypnogram,
    scoring_labels_to_csv,
)

logger = logging.getLogger(__name__)

Notifier = Callable[[str, dict], None]


class Storage:
    """Filesystem blob store rooted at one directory; writes are atomic."""

    def __init__(self, root: str | Path):
        self.root = Path(root).resolve()
        self.root.mkdir(parents=True, exist_ok=True)

    def path(self, ref: str) -> Path:
        pure = PurePosixPath(ref)
        if pure.is_absolute() or ".." in pure.parts:
            raise SomnolineError(f"storage ref {ref!r} escapes the storage root")
        return self.root / pure

    def exists(self, ref: str) -> bool:
        return self.path(ref).exists()

    def read_bytes(self, ref: str) -> bytes:
        return self.path(ref).read_bytes()

    def write_bytes(self, ref: str, data: bytes) -> None:
        target = self.path(ref)
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(data)
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def read_text(self, ref: str) -> str:
        return self.read_bytes(ref).decode("utf-8")

    def write_text(self, ref: str, text: str) -> None:
        self.write_bytes(ref, text.encode("utf-8"))


class HttpNotifier:
    """Posts worker signals to the front end's internal callback endpoints."""

    def __init__(self, frontend_url: str, internal_secret: str, timeout_s: float = 30.0):
        self.frontend_url = frontend_url.rstrip("/")
        self.internal_secret = internal_secret
        self.timeout_s = timeout_s

    def __call__(self, kind: str, payload: dict) -> None:
        response = httpx.post(
            f"{self.frontend_url}/internal/{kind}",
            json=payload,
            headers={"X-Internal-Secret": self.internal_secret},
            timeout=self.timeout_s,
        )
        response.raise_for_status()


def recording_id_of_upload(recording_ref: str) -> str:
    return PurePosixPath(recording_ref).name.removesuffix(".edf")


def process_night_bundles(
    night_bytes: bytes,
    scorer: ScorerSpec,
    gray_threshold: float = DEFAULT_GRAY_THRESHOLD,
    epoch_length_s: float = DEFAULT_EPOCH_LENGTH_S,
) -> dict[str, bytes]:
    """Score one night and build both processor outputs, keyed by bundle path.

    The scoring bundle pairs the night EDF with technologist-searchable
    labels ("uncertain-<stage>" on gray epochs); the ML bundle pairs it with
    the raw hypnodensity and the gray mask.
    """
    night = read_recording(night_bytes)
    hypnodensity = score(night, scorer, epoch_length_s)
    series = certainty(hypnodensity)
    mask = tag_gray(hypnodensity, gray_threshold)
    hypnogram = hypnodensity_to_hypnogram(
        hypnodensity, start_time=night.header.start_datetime
    )
    labels = encode_scoring_labels(apply_mask(hypnogram, mask))
    return {
        "scoring/night.edf": night_bytes,
        "scoring/labels.csv": scoring_labels_to_csv(labels).encode(),
        "ml/night.edf": night_bytes,
        "ml/hypnodensity.csv": hypnodensity_to_csv(hypnodensity).encode(),
        "ml/gray_mask.csv": gray_mask_to_csv(mask, series).encode(),
    }


def night_ref(recording_id: str, night_index: int) -> str:
    return f"recordings/{recording_id}/night_{night_index}.edf"


def bundle_ref(recording_id: str, night_index: int, bundle: str, name: str) -> str:
    return f"recordings/{recording_id}/night_{night_index}/{bundle}/{name}"


class _QueueWorker:
    """step()/run_forever() scaffolding shared by both workers."""

    queue: DurableQueue
    lease_s: float

    def step(self) -> bool:
        """Handle at most one job; False when the queue was empty."""
        msg = self.queue.dequeue(self.lease_s)
        if msg is None:
            return False
        try:
            self._handle(msg)
        except Exception:
            logger.exception("job %s failed (attempt %d)", msg.job_id, msg.attempt)
            self._settle(self.queue.nack, msg.job_id)
        else:
            self._settle(self.queue.ack, msg.job_id)
        return True

    def _settle(self, op, job_id: str) -> None:
        try:
            op(job_id)
        except UnknownJob:
            # lease expired while we worked; redelivery handles the rest
            logger.warning("job %s lease expired before settle", job_id)

    def run_forever(self, stop: threading.Event | None = None, poll_s: float = 0.2) -> None:
        while stop is None or not stop.is_set():
            if not self.step():
                if stop is not None and stop.wait(poll_s):
                    return
                elif stop is None:
                    threading.Event().wait(poll_s)

    def _handle(self, msg: JobMessage) -> None:
        raise NotImplementedError


class SplitterWorker(_QueueWorker):
    def __init__(
        self,
        q_split: DurableQueue,
        q_process: DurableQueue,
        storage: Storage,
        notify: Notifier,
        gap_threshold_s: float = DEFAULT_GAP_THRESHOLD_S,
        lease_s: float = DEFAULT_LEASE_S,
    ):
        self.queue = q_split
        self.q_process = q_process
        self.storage = storage
        self.notify = notify
        self.gap_threshold_s = gap_threshold_s
        self.lease_s = lease_s

    def _handle(self, msg: JobMessage) -> None:
        rec = read_recording(self.storage.read_bytes(msg.recording_ref))
        manifest = None
        sidecar = msg.recording_ref + ".nights.json"
        if self.storage.exists(sidecar):
            manifest = parse_nights_manifest(self.storage.read_text(sidecar))
        ranges = detect_night_boundaries(rec, self.gap_threshold_s, manifest)
        nights = split_nights(rec, ranges)

        rid = recording_id_of_upload(msg.recording_ref)
        for i, night in enumerate(nights):
            self.storage.write_bytes(night_ref(rid, i), write_recording(night))
        # signal before enqueueing: the front end must have registered the
        # nights before any processor can report one complete
        self.notify("split-complete", {"recording_id": rid, "nights": len(nights)})
        for i in range(len(nights)):
            self.q_process.enqueue(
                JobMessage(
                    job_id=f"process:{rid}:{i}",
                    kind=KIND_PROCESS,
                    recording_ref=night_ref(rid, i),
                    night_index=i,
                )
            )


class ProcessorWorker(_QueueWorker):
    def __init__(
        self,
        q_process: DurableQueue,
        storage: Storage,
        notify: Notifier,
        scorer: ScorerSpec,
        gray_threshold: float = DEFAULT_GRAY_THRESHOLD,
        epoch_length_s: float = DEFAULT_EPOCH_LENGTH_S,
        lease_s: float = DEFAULT_LEASE_S,
    ):
        self.queue = q_process
        self.storage = storage
        self.notify = notify
        self.scorer = scorer
        self.gray_threshold = gray_threshold
        self.epoch_length_s = epoch_length_s
        self.lease_s = lease_s

    def _resolve_scorer(self, recording_id: str, night_index: int) -> ScorerSpec:
        """Precomputed sources live under <source>/<rid>/night_<i>.csv."""
        if self.scorer.kind is ScorerKind.PRECOMPUTED:
            return ScorerSpec(
                kind=ScorerKind.PRECOMPUTED,
                source=Path(self.scorer.source) / recording_id / f"night_{night_index}.csv",
            )
        return self.scorer

    def _handle(self, msg: JobMessage) -> None:
        night_bytes = self.storage.read_bytes(msg.recording_ref)
        rid = PurePosixPath(msg.recording_ref).parent.name
        index = msg.night_index
        bundles = process_night_bundles(
            night_bytes,
            self._resolve_scorer(rid, index),
            self.gray_threshold,
            self.epoch_length_s,
        )
        for name, content in bundles.items():
            self.storage.write_bytes(
                f"recordings/{rid}/night_{index}/{name}", content
            )
        self.notify(
            "process-complete", {"recording_id": rid, "night_index": index}
        )
