"""Sleep-staging domain types and deterministic conversions.

Stages follow the AASM five-stage convention with stable integer codes
W=0, N1=1, N2=2, N3=3, REM=4. Epochs default to 30 seconds.
"""
from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Sequence, Union

import numpy as np

from .errors import SomnolineError

DEFAULT_EPOCH_LENGTH_S = 30.0
PROBABILITY_TOLERANCE = 1e-6
UNCERTAIN_PREFIX = "uncertain-"


class EmptyWindow(SomnolineError):
    """Analysis window does not overlap the hypnogram."""


class InvalidProbabilityRow(SomnolineError):
    """A hypnodensity row is negative or does not sum to one."""


class SleepStage(enum.IntEnum):
    W = 0
    N1 = 1
    N2 = 2
    N3 = 3
    REM = 4

    @classmethod
    def from_label(cls, label: str) -> "SleepStage":
        try:
            return cls[label.strip()]
        except KeyError:
            raise SomnolineError(f"unknown sleep stage label {label!r}") from None


STAGE_COUNT = len(SleepStage)


@dataclass(frozen=True)
class GrayEntry:
    """A gray-area epoch carrying the scorer's suggested stage."""

    suggested: SleepStage


StarEntry = Union[SleepStage, GrayEntry]


@dataclass(frozen=True)
class AnalysisWindow:
    lights_out: datetime
    lights_on: datetime

    def __post_init__(self):
        if self.lights_out >= self.lights_on:
            raise SomnolineError("lights_out must precede lights_on")


@dataclass(frozen=True)
class Hypnogram:
    stages: tuple[SleepStage, ...]
    epoch_length_s: float = DEFAULT_EPOCH_LENGTH_S
    start_time: datetime | None = None

    def __post_init__(self):
        if not self.stages:
            raise SomnolineError("hypnogram must contain at least one epoch")
        if self.epoch_length_s <= 0:
            raise SomnolineError("epoch_length_s must be positive")
        object.__setattr__(self, "stages", tuple(SleepStage(s) for s in self.stages))

    def __len__(self) -> int:
        return len(self.stages)

    def epoch_start(self, index: int) -> datetime:
        if self.start_time is None:
            raise SomnolineError("hypnogram has no start_time")
        return self.start_time + timedelta(seconds=index * self.epoch_length_s)


@dataclass(eq=False)
class Hypnodensity:
    """Per-epoch probability distribution over the five stages."""

    rows: np.ndarray
    epoch_length_s: float = DEFAULT_EPOCH_LENGTH_S

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != STAGE_COUNT:
            raise InvalidProbabilityRow(
                f"hypnodensity must be (epochs, {STAGE_COUNT}), got {rows.shape}"
            )
        if rows.shape[0] == 0:
            raise InvalidProbabilityRow("hypnodensity must contain at least one epoch")
        validate_probability_rows(rows)
        self.rows = rows

    def __len__(self) -> int:
        return self.rows.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Hypnodensity):
            return NotImplemented
        return self.epoch_length_s == other.epoch_length_s and np.array_equal(
            self.rows, other.rows
        )


def validate_probability_rows(rows: np.ndarray) -> None:
    if np.any(rows < 0):
        bad = int(np.argwhere(rows < 0)[0][0])
        raise InvalidProbabilityRow(f"row {bad} has a negative probability")
    sums = rows.sum(axis=1)
    off = np.abs(sums - 1.0) > PROBABILITY_TOLERANCE
    if np.any(off):
        bad = int(np.argmax(off))
        raise InvalidProbabilityRow(
            f"row {bad} sums to {sums[bad]:.8f}, expected 1 within {PROBABILITY_TOLERANCE}"
        )


@dataclass(frozen=True)
class StarHypnogram:
    """Hypnogram whose low-certainty epochs are gray (whitespace) entries."""

    entries: tuple[StarEntry, ...]
    epoch_length_s: float = DEFAULT_EPOCH_LENGTH_S

    def __post_init__(self):
        if not self.entries:
            raise SomnolineError("star hypnogram must contain at least one epoch")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def gray_flags(self) -> np.ndarray:
        return np.array([isinstance(e, GrayEntry) for e in self.entries], dtype=bool)


def hypnodensity_to_hypnogram(
    h: Hypnodensity, start_time: datetime | None = None
) -> Hypnogram:
    """Per-epoch argmax; ties break toward the lowest stage code."""
    codes = np.argmax(h.rows, axis=1)
    return Hypnogram(
        stages=tuple(SleepStage(int(c)) for c in codes),
        epoch_length_s=h.epoch_length_s,
        start_time=start_time,
    )


def trim_to_window(hyp: Hypnogram, window: AnalysisWindow) -> Hypnogram:
    """Keep epochs whose start falls in [lights_out, lights_on)."""
    if hyp.start_time is None:
        raise SomnolineError("cannot trim a hypnogram without a start_time")
    keep = [
        i
        for i in range(len(hyp))
        if window.lights_out <= hyp.epoch_start(i) < window.lights_on
    ]
    if not keep:
        raise EmptyWindow("analysis window keeps no epochs")
    first, last = keep[0], keep[-1]
    return Hypnogram(
        stages=hyp.stages[first : last + 1],
        epoch_length_s=hyp.epoch_length_s,
        start_time=hyp.epoch_start(first),
    )


def encode_scoring_labels(star: StarHypnogram) -> list[str]:
    """Stage names, with gray epochs as searchable "uncertain-<stage>" labels."""
    labels = []
    for entry in star.entries:
        if isinstance(entry, GrayEntry):
            labels.append(UNCERTAIN_PREFIX + entry.suggested.name)
        else:
            labels.append(entry.name)
    return labels


def decode_scoring_label(label: str) -> StarEntry:
    if label.startswith(UNCERTAIN_PREFIX):
        return GrayEntry(SleepStage.from_label(label[len(UNCERTAIN_PREFIX) :]))
    return SleepStage.from_label(label)


# --- CSV interchange -------------------------------------------------------

def hypnogram_to_csv(hyp: Hypnogram) -> str:
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["epoch_index", "stage"])
    for i, stage in enumerate(hyp.stages):
        writer.writerow([i, stage.name])
    return out.getvalue()


def hypnogram_from_csv(
    text: str, epoch_length_s: float = DEFAULT_EPOCH_LENGTH_S
) -> Hypnogram:
    stages = []
    for row in _data_rows(text, "epoch_index"):
        stages.append(SleepStage.from_label(row[1]))
    return Hypnogram(stages=tuple(stages), epoch_length_s=epoch_length_s)


def hypnodensity_to_csv(h: Hypnodensity) -> str:
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["epoch_index", "pW", "pN1", "pN2", "pN3", "pREM"])
    for i, row in enumerate(h.rows):
        writer.writerow([i] + [format(p, ".17g") for p in row])
    return out.getvalue()


def hypnodensity_from_csv(
    text: str, epoch_length_s: float = DEFAULT_EPOCH_LENGTH_S
) -> Hypnodensity:
    rows = []
    for row in _data_rows(text, "epoch_index"):
        if len(row) != 1 + STAGE_COUNT:
            raise InvalidProbabilityRow(f"expected 6 columns, got {len(row)}")
        rows.append([float(v) for v in row[1:]])
    if not rows:
        raise InvalidProbabilityRow("hypnodensity CSV has no rows")
    return Hypnodensity(rows=np.array(rows), epoch_length_s=epoch_length_s)


def scoring_labels_to_csv(labels: Sequence[str]) -> str:
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["epoch_index", "label"])
    for i, label in enumerate(labels):
        writer.writerow([i, label])
    return out.getvalue()


def _data_rows(text: str, header_first_cell: str):
    reader = csv.reader(io.StringIO(text))
    for i, row in enumerate(reader):
        if not row:
            continue
        if i == 0 and row[0].strip() == header_first_cell:
            continue
        yield row
