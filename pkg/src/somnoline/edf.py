"""Bit-exact EDF / EDF+ reader and writer, night-boundary detection and splitting.

Header fields are kept as their exact fixed-width ASCII strings so that a
parsed file serializes back byte-for-byte; typed accessors parse on demand.
Recordings built programmatically get canonical encodings. Sample data is a
single ``(num_records, samples_per_record_total)`` int16 array; splitting
slices it without touching sample values, so outputs are bit-exact copies of
the source records (only the first timekeeping annotation of each record is
rewritten relative to the new file start).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from datetime import datetime, timedelta
from decimal import Decimal, InvalidOperation
from typing import Sequence

import numpy as np

from .errors import SomnolineError

ANNOTATION_LABEL = "EDF Annotations"
DEFAULT_GAP_THRESHOLD_S = 3600.0

_HEADER_WIDTHS = (8, 80, 80, 8, 8, 8, 44, 8, 8, 4)
_SIGNAL_WIDTHS = (16, 80, 8, 8, 8, 8, 8, 80, 8, 32)


class MalformedHeader(SomnolineError):
    """Header bytes are not printable ASCII or fields do not parse."""


class TruncatedRecords(SomnolineError):
    """The byte stream is shorter than the header declares."""


class InconsistentSignalCount(SomnolineError):
    """Declared signal count disagrees with the header size field."""


class InvariantViolation(SomnolineError):
    """A recording about to be written violates a structural invariant."""


class NoTimestamps(SomnolineError):
    """Night detection needs EDF+D record onsets or a sidecar manifest."""


class EmptyRecording(SomnolineError):
    """Operation requires at least one data record."""


class RangeOutOfBounds(SomnolineError):
    """A night range does not fit the recording's records."""


def _printable(text: str) -> bool:
    return all(32 <= ord(ch) <= 126 for ch in text)


def _pad(text: str, width: int) -> str:
    if len(text) > width:
        raise InvariantViolation(f"value {text!r} longer than {width} chars")
    if not _printable(text):
        raise InvariantViolation(f"value {text!r} contains non-printable characters")
    return text.ljust(width)


def _format_number(value: float | int, width: int) -> str:
    if isinstance(value, (int, np.integer)) or float(value) == int(value):
        s = str(int(value))
    else:
        s = f"{value:.{width}g}"
        for prec in range(width, 0, -1):
            s = f"{value:.{prec}g}"
            if len(s) <= width:
                break
    if len(s) > width:
        raise InvariantViolation(f"cannot encode {value!r} in {width} ASCII chars")
    return s.ljust(width)


def _parse_int(raw: str, field: str) -> int:
    try:
        return int(raw.strip())
    except ValueError:
        raise MalformedHeader(f"field {field!r} is not an integer: {raw!r}") from None


def _parse_float(raw: str, field: str) -> float:
    try:
        return float(raw.strip())
    except ValueError:
        raise MalformedHeader(f"field {field!r} is not a number: {raw!r}") from None


def _encode_date(dt: datetime) -> str:
    if not 1985 <= dt.year <= 2084:
        raise InvariantViolation(f"EDF start year must be in 1985..2084, got {dt.year}")
    return f"{dt.day:02d}.{dt.month:02d}.{dt.year % 100:02d}"


def _encode_time(dt: datetime) -> str:
    return f"{dt.hour:02d}.{dt.minute:02d}.{dt.second:02d}"


def _parse_datetime(date_raw: str, time_raw: str) -> datetime:
    try:
        day, month, yy = (int(p) for p in date_raw.strip().split("."))
        hour, minute, second = (int(p) for p in time_raw.strip().split("."))
        year = 1900 + yy if yy >= 85 else 2000 + yy
        return datetime(year, month, day, hour, minute, second)
    except ValueError:
        raise MalformedHeader(
            f"bad start date/time: {date_raw!r} {time_raw!r}"
        ) from None


@dataclass(frozen=True)
class EdfHeader:
    """The 256-byte main header, each field as its exact fixed-width string."""

    version: str
    patient_id: str
    recording_id: str
    startdate: str
    starttime: str
    header_bytes_raw: str
    reserved: str
    record_count_raw: str
    record_duration_raw: str
    signal_count_raw: str

    @classmethod
    def build(
        cls,
        *,
        start_datetime: datetime,
        record_count: int,
        record_duration_s: float,
        signal_count: int,
        patient_id: str = "X",
        recording_id: str = "Startdate X X X X",
        reserved: str = "",
        version: str = "0",
    ) -> "EdfHeader":
        return cls(
            version=_pad(version, 8),
            patient_id=_pad(patient_id, 80),
            recording_id=_pad(recording_id, 80),
            startdate=_pad(_encode_date(start_datetime), 8),
            starttime=_pad(_encode_time(start_datetime), 8),
            header_bytes_raw=_format_number(256 + 256 * signal_count, 8),
            reserved=_pad(reserved, 44),
            record_count_raw=_format_number(record_count, 8),
            record_duration_raw=_format_number(record_duration_s, 8),
            signal_count_raw=_format_number(signal_count, 4),
        )

    @property
    def start_datetime(self) -> datetime:
        return _parse_datetime(self.startdate, self.starttime)

    @property
    def header_bytes(self) -> int:
        return _parse_int(self.header_bytes_raw, "header_bytes")

    @property
    def record_count(self) -> int:
        return _parse_int(self.record_count_raw, "record_count")

    @property
    def record_duration_s(self) -> float:
        return _parse_float(self.record_duration_raw, "record_duration")

    @property
    def signal_count(self) -> int:
        return _parse_int(self.signal_count_raw, "signal_count")

    @property
    def edf_type(self) -> str:
        """"EDF+C", "EDF+D", or "" for plain EDF."""
        head = self.reserved[:5]
        return head if head in ("EDF+C", "EDF+D") else ""

    def with_record_count(self, count: int) -> "EdfHeader":
        return replace(self, record_count_raw=_format_number(count, 8))

    def with_start_datetime(self, dt: datetime) -> "EdfHeader":
        return replace(
            self,
            startdate=_pad(_encode_date(dt), 8),
            starttime=_pad(_encode_time(dt), 8),
        )

    def encode(self) -> bytes:
        fields = (
            self.version,
            self.patient_id,
            self.recording_id,
            self.startdate,
            self.starttime,
            self.header_bytes_raw,
            self.reserved,
            self.record_count_raw,
            self.record_duration_raw,
            self.signal_count_raw,
        )
        for value, width in zip(fields, _HEADER_WIDTHS):
            if len(value) != width:
                raise InvariantViolation(
                    f"header field has width {len(value)}, expected {width}"
                )
        return "".join(fields).encode("ascii")


@dataclass(frozen=True)
class SignalHeader:
    """One signal's 256-byte header share, raw fixed-width strings."""

    label: str
    transducer: str
    physical_dim: str
    phys_min_raw: str
    phys_max_raw: str
    dig_min_raw: str
    dig_max_raw: str
    prefiltering: str
    samples_per_record_raw: str
    reserved: str

    @classmethod
    def build(
        cls,
        *,
        label: str,
        samples_per_record: int,
        phys_min: float = -32768.0,
        phys_max: float = 32767.0,
        dig_min: int = -32768,
        dig_max: int = 32767,
        transducer: str = "",
        physical_dim: str = "",
        prefiltering: str = "",
        reserved: str = "",
    ) -> "SignalHeader":
        return cls(
            label=_pad(label, 16),
            transducer=_pad(transducer, 80),
            physical_dim=_pad(physical_dim, 8),
            phys_min_raw=_format_number(phys_min, 8),
            phys_max_raw=_format_number(phys_max, 8),
            dig_min_raw=_format_number(dig_min, 8),
            dig_max_raw=_format_number(dig_max, 8),
            prefiltering=_pad(prefiltering, 80),
            samples_per_record_raw=_format_number(samples_per_record, 8),
            reserved=_pad(reserved, 32),
        )

    @property
    def phys_min(self) -> float:
        return _parse_float(self.phys_min_raw, "phys_min")

    @property
    def phys_max(self) -> float:
        return _parse_float(self.phys_max_raw, "phys_max")

    @property
    def dig_min(self) -> int:
        return _parse_int(self.dig_min_raw, "dig_min")

    @property
    def dig_max(self) -> int:
        return _parse_int(self.dig_max_raw, "dig_max")

    @property
    def samples_per_record(self) -> int:
        return _parse_int(self.samples_per_record_raw, "samples_per_record")

    @property
    def is_annotation(self) -> bool:
        return self.label.strip() == ANNOTATION_LABEL


def make_annotation_signal(samples_per_record: int) -> SignalHeader:
    """Standard EDF+ annotation channel header."""
    return SignalHeader.build(
        label=ANNOTATION_LABEL,
        samples_per_record=samples_per_record,
        phys_min=0.0,
        phys_max=1.0,
        dig_min=-32768,
        dig_max=32767,
    )


@dataclass(eq=False)
class EdfRecording:
    """Fully materialized EDF file: header, signal headers, digital samples.

    ``data`` has one row per data record; columns are the record's samples,
    signal by signal in header order. Treat instances as immutable.
    """

    header: EdfHeader
    signals: tuple[SignalHeader, ...]
    data: np.ndarray

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EdfRecording):
            return NotImplemented
        return (
            self.header == other.header
            and self.signals == other.signals
            and np.array_equal(self.data, other.data)
        )

    @property
    def record_samples(self) -> int:
        return sum(s.samples_per_record for s in self.signals)

    @property
    def num_records(self) -> int:
        return self.data.shape[0]

    @property
    def is_discontinuous(self) -> bool:
        return self.header.edf_type == "EDF+D"

    def signal_slice(self, index: int) -> tuple[int, int]:
        start = sum(s.samples_per_record for s in self.signals[:index])
        return start, start + self.signals[index].samples_per_record

    def find_signal(self, label: str) -> int | None:
        for i, sig in enumerate(self.signals):
            if sig.label.strip() == label.strip():
                return i
        return None

    def annotation_indices(self) -> list[int]:
        return [i for i, s in enumerate(self.signals) if s.is_annotation]

    def signal_digital(self, index: int) -> np.ndarray:
        a, b = self.signal_slice(index)
        return self.data[:, a:b].ravel()

    def signal_physical(self, index: int) -> np.ndarray:
        sig = self.signals[index]
        gain = (sig.phys_max - sig.phys_min) / (sig.dig_max - sig.dig_min)
        digital = self.signal_digital(index).astype(np.float64)
        return (digital - sig.dig_min) * gain + sig.phys_min

    def sampling_frequency(self, index: int) -> float:
        return self.signals[index].samples_per_record / self.header.record_duration_s

    def duration_s(self) -> float:
        return self.num_records * self.header.record_duration_s

    def record_onsets(self) -> list[Decimal]:
        """Onset (seconds from file start) of each record's first annotation TAL."""
        ann = self.annotation_indices()
        if not ann:
            raise NoTimestamps("recording has no annotation channel")
        a, b = self.signal_slice(ann[0])
        onsets = []
        for row in range(self.num_records):
            raw = self.data[row, a:b].astype("<i2", copy=False).tobytes()
            onset = _first_tal_onset(raw)
            if onset is None:
                raise NoTimestamps(f"record {row} has no timekeeping annotation")
            onsets.append(onset)
        return onsets

    def validate(self) -> None:
        hdr = self.header
        ns = hdr.signal_count
        if ns < 1 or ns != len(self.signals):
            raise InvariantViolation(
                f"signal_count {ns} does not match {len(self.signals)} signal headers"
            )
        if hdr.header_bytes != 256 + 256 * ns:
            raise InvariantViolation("header_bytes must be 256 + 256 * signal_count")
        if hdr.record_duration_s <= 0:
            raise InvariantViolation("record_duration_s must be positive")
        declared = hdr.record_count
        if declared != -1 and declared != self.num_records:
            raise InvariantViolation(
                f"record_count {declared} does not match {self.num_records} data records"
            )
        if self.data.ndim != 2 or self.data.shape[1] != self.record_samples:
            raise InvariantViolation("data shape does not match samples_per_record sum")
        for sig in self.signals:
            if sig.dig_min >= sig.dig_max:
                raise InvariantViolation(f"dig_min >= dig_max for {sig.label.strip()!r}")
            if sig.phys_min == sig.phys_max:
                raise InvariantViolation(f"phys_min == phys_max for {sig.label.strip()!r}")
            if sig.samples_per_record < 1:
                raise InvariantViolation("samples_per_record must be >= 1")
        if self.is_discontinuous and self.annotation_indices() and self.num_records > 1:
            onsets = self.record_onsets()
            for i in range(len(onsets) - 1):
                if onsets[i + 1] <= onsets[i]:
                    raise InvariantViolation("EDF+D record onsets must strictly increase")


def read_recording(data: bytes) -> EdfRecording:
    """Parse EDF/EDF+ bytes into an :class:`EdfRecording`.

    An unknown record count (-1) is resolved from the stream length and
    normalized, so serializing the result writes the actual count.
    """
    if len(data) < 256:
        raise MalformedHeader(f"stream of {len(data)} bytes cannot hold a 256-byte header")
    try:
        head = data[:256].decode("ascii")
    except UnicodeDecodeError:
        raise MalformedHeader("header contains non-ASCII bytes") from None
    if not _printable(head):
        raise MalformedHeader("header contains non-printable characters")

    fields = []
    pos = 0
    for width in _HEADER_WIDTHS:
        fields.append(head[pos : pos + width])
        pos += width
    header = EdfHeader(*fields)

    ns = header.signal_count
    if ns < 1:
        raise InconsistentSignalCount(f"signal_count must be >= 1, got {ns}")
    if header.header_bytes != 256 + 256 * ns:
        raise InconsistentSignalCount(
            f"header_bytes {header.header_bytes} != 256 + 256 * {ns}"
        )
    if len(data) < header.header_bytes:
        raise TruncatedRecords(
            f"stream ends inside signal headers ({len(data)} < {header.header_bytes})"
        )
    try:
        sig_block = data[256 : header.header_bytes].decode("ascii")
    except UnicodeDecodeError:
        raise MalformedHeader("signal headers contain non-ASCII bytes") from None
    if not _printable(sig_block):
        raise MalformedHeader("signal headers contain non-printable characters")

    columns: list[list[str]] = []
    pos = 0
    for width in _SIGNAL_WIDTHS:
        columns.append([sig_block[pos + i * width : pos + (i + 1) * width] for i in range(ns)])
        pos += width * ns
    signals = tuple(SignalHeader(*(col[i] for col in columns)) for i in range(ns))

    record_samples = 0
    for sig in signals:
        spr = sig.samples_per_record
        if spr < 1:
            raise MalformedHeader(f"samples_per_record must be >= 1, got {spr}")
        record_samples += spr
    record_bytes = 2 * record_samples

    payload = len(data) - header.header_bytes
    declared = header.record_count
    if declared == -1:
        if payload % record_bytes:
            raise TruncatedRecords("stream ends inside a data record")
        count = payload // record_bytes
        header = header.with_record_count(count)
    else:
        if declared < 0:
            raise MalformedHeader(f"record_count must be >= -1, got {declared}")
        count = declared
        if payload < count * record_bytes:
            raise TruncatedRecords(
                f"{count} records declared but only {payload} data bytes present"
            )
        if payload > count * record_bytes:
            raise MalformedHeader(
                f"stream has {payload - count * record_bytes} bytes beyond declared records"
            )

    samples = np.frombuffer(
        data, dtype="<i2", count=count * record_samples, offset=header.header_bytes
    ).reshape(count, record_samples)
    return EdfRecording(header=header, signals=signals, data=samples)


def write_recording(rec: EdfRecording) -> bytes:
    """Serialize to EDF bytes; exact inverse of :func:`read_recording`."""
    rec.validate()
    header = rec.header
    if header.record_count == -1:
        header = header.with_record_count(rec.num_records)
    parts = [header.encode()]
    for attr, width in zip(
        (
            "label",
            "transducer",
            "physical_dim",
            "phys_min_raw",
            "phys_max_raw",
            "dig_min_raw",
            "dig_max_raw",
            "prefiltering",
            "samples_per_record_raw",
            "reserved",
        ),
        _SIGNAL_WIDTHS,
    ):
        for sig in rec.signals:
            value = getattr(sig, attr)
            if len(value) != width:
                raise InvariantViolation(
                    f"signal field {attr} has width {len(value)}, expected {width}"
                )
            parts.append(value.encode("ascii"))
    parts.append(np.ascontiguousarray(rec.data, dtype="<i2").tobytes())
    return b"".join(parts)


def _first_tal_onset(raw: bytes) -> Decimal | None:
    end = raw.find(b"\x00")
    if end <= 0:
        return None
    tal = raw[:end]
    sep = len(tal)
    for i, byte in enumerate(tal):
        if byte in (0x14, 0x15):
            sep = i
            break
    text = tal[:sep].decode("ascii", errors="replace")
    if not text.startswith(("+", "-")):
        return None
    try:
        return Decimal(text)
    except InvalidOperation:
        return None


def _format_onset(value: Decimal) -> bytes:
    sign = "-" if value < 0 else "+"
    digits = format(abs(value), "f")
    if "." in digits:
        digits = digits.rstrip("0").rstrip(".")
    return (sign + (digits or "0")).encode("ascii")


def encode_timekeeping_tal(onset: float | Decimal, num_samples: int) -> np.ndarray:
    """Annotation-channel samples holding just the record's timekeeping TAL."""
    tal = _format_onset(Decimal(str(onset))) + b"\x14\x14\x00"
    budget = 2 * num_samples
    if len(tal) > budget:
        raise InvariantViolation(
            f"timekeeping TAL needs {len(tal)} bytes, channel holds {budget}"
        )
    return np.frombuffer(tal.ljust(budget, b"\x00"), dtype="<i2").copy()


def _shift_first_tal(raw: bytes, shift: Decimal) -> bytes:
    """Rewrite the record's timekeeping onset by -shift, keeping byte length."""
    end = raw.find(b"\x00")
    if end <= 0:
        return raw
    tal = raw[:end]
    sep = len(tal)
    for i, byte in enumerate(tal):
        if byte in (0x14, 0x15):
            sep = i
            break
    try:
        onset = Decimal(tal[:sep].decode("ascii"))
    except (InvalidOperation, UnicodeDecodeError):
        return raw
    rebuilt = _format_onset(onset - shift) + tal[sep:] + b"\x00" + raw[end + 1 :]
    core = rebuilt.rstrip(b"\x00")
    if len(core) + 1 > len(raw):
        raise InvariantViolation("rewritten annotations exceed record capacity")
    return core.ljust(len(raw), b"\x00")


def parse_nights_manifest(text: str) -> list[tuple[int, int]]:
    """Sidecar manifest: ``{"nights": [{"start_record": s, "end_record": e}]}``.

    ``end_record`` is exclusive, like a Python slice.
    """
    try:
        doc = json.loads(text)
        nights = [
            (int(n["start_record"]), int(n["end_record"])) for n in doc["nights"]
        ]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError):
        raise MalformedHeader("nights manifest is not valid") from None
    if not nights:
        raise MalformedHeader("nights manifest lists no nights")
    return nights


def _check_ranges(ranges: Sequence[tuple[int, int]], num_records: int) -> None:
    prev_end = 0
    for start, end in ranges:
        if not (0 <= start < end <= num_records):
            raise RangeOutOfBounds(
                f"range [{start}, {end}) outside 0..{num_records}"
            )
        if start < prev_end:
            raise RangeOutOfBounds(f"range [{start}, {end}) overlaps its predecessor")
        prev_end = end


def detect_night_boundaries(
    rec: EdfRecording,
    gap_threshold_s: float = DEFAULT_GAP_THRESHOLD_S,
    manifest: Sequence[tuple[int, int]] | None = None,
) -> list[tuple[int, int]]:
    """Record index ranges (end-exclusive), one per night.

    A new range starts wherever the gap between consecutive record onsets
    exceeds ``gap_threshold_s``. Continuous files have no onsets to inspect,
    so they require a sidecar ``manifest``; an explicit manifest always wins.
    """
    if rec.num_records == 0:
        raise EmptyRecording("recording has no data records")
    if manifest is not None:
        ranges = [tuple(r) for r in manifest]
        _check_ranges(ranges, rec.num_records)
        return ranges
    if not rec.is_discontinuous:
        raise NoTimestamps("continuous recording needs a nights manifest to split")
    onsets = [float(o) for o in rec.record_onsets()]
    for i in range(len(onsets) - 1):
        if onsets[i + 1] <= onsets[i]:
            raise InvariantViolation("EDF+D record onsets must strictly increase")
    duration = rec.header.record_duration_s
    ranges = []
    start = 0
    for i in range(rec.num_records - 1):
        if onsets[i + 1] - (onsets[i] + duration) > gap_threshold_s:
            ranges.append((start, i + 1))
            start = i + 1
    ranges.append((start, rec.num_records))
    return ranges


def split_nights(
    rec: EdfRecording, ranges: Sequence[tuple[int, int]]
) -> list[EdfRecording]:
    """One recording per range; raw samples are carried over bit-exactly.

    Each output's start time advances by the whole seconds of its first
    record's onset, and annotation timekeeping TALs are rewritten relative to
    the new start so absolute event times are preserved.
    """
    _check_ranges(ranges, rec.num_records)
    annotations = rec.annotation_indices()
    if annotations:
        onsets = rec.record_onsets()
    else:
        duration = Decimal(rec.header.record_duration_raw.strip())
        onsets = [duration * i for i in range(rec.num_records)]
    start_time = rec.header.start_datetime

    nights = []
    for start, end in ranges:
        chunk = rec.data[start:end].copy()
        base = onsets[start]
        shift = Decimal(math.floor(base))
        if annotations and shift:
            for index in annotations:
                a, b = rec.signal_slice(index)
                for row in range(chunk.shape[0]):
                    raw = chunk[row, a:b].astype("<i2", copy=False).tobytes()
                    rewritten = _shift_first_tal(raw, shift)
                    chunk[row, a:b] = np.frombuffer(rewritten, dtype="<i2")
        header = rec.header.with_record_count(end - start)
        if shift:
            header = header.with_start_datetime(
                start_time + timedelta(seconds=int(shift))
            )
        nights.append(EdfRecording(header=header, signals=rec.signals, data=chunk))
    return nights
