"""Shared builders for randomized EDF recordings used across test modules."""
import string
from datetime import datetime

import numpy as np

from somnoline.edf import (
    EdfHeader,
    EdfRecording,
    SignalHeader,
    encode_timekeeping_tal,
    make_annotation_signal,
)

_TEXT_ALPHABET = string.ascii_letters + string.digits + " ._-"


def random_text(rng, max_len):
    n = int(rng.integers(0, max_len + 1))
    return "".join(rng.choice(list(_TEXT_ALPHABET)) for _ in range(n)).strip()


def make_random_recording(rng, with_annotations=False, max_records=12):
    """A structurally valid recording with randomized headers and samples."""
    n_data_signals = int(rng.integers(1, 5))
    n_records = int(rng.integers(1, max_records + 1))
    duration = float(rng.choice([0.5, 1.0, 2.0, 30.0]))

    signals = []
    for i in range(n_data_signals):
        dig_min = int(rng.integers(-32768, 0))
        dig_max = int(rng.integers(1, 32768))
        phys_min = float(rng.integers(-500, 0))
        phys_max = float(rng.integers(1, 500))
        signals.append(
            SignalHeader.build(
                label=f"sig{i} {random_text(rng, 8)}"[:16].strip(),
                transducer=random_text(rng, 20),
                physical_dim=random_text(rng, 6),
                phys_min=phys_min,
                phys_max=phys_max,
                dig_min=dig_min,
                dig_max=dig_max,
                prefiltering=random_text(rng, 20),
                samples_per_record=int(rng.integers(1, 17)),
            )
        )
    reserved = ""
    if with_annotations:
        signals.append(make_annotation_signal(12))
        reserved = "EDF+D"

    header = EdfHeader.build(
        start_datetime=datetime(2023, 8, 2, 22, 15, 0),
        record_count=n_records,
        record_duration_s=duration,
        signal_count=len(signals),
        patient_id=random_text(rng, 30) or "X",
        recording_id=random_text(rng, 30) or "X",
        reserved=reserved,
    )

    record_samples = sum(s.samples_per_record for s in signals)
    data = rng.integers(-32768, 32768, size=(n_records, record_samples)).astype("<i2")
    if with_annotations:
        onset = 0.0
        a = record_samples - 12
        for row in range(n_records):
            data[row, a:] = encode_timekeeping_tal(onset, 12)
            onset += duration + float(rng.choice([0.0, 0.0, 5000.0]))
    rec = EdfRecording(header=header, signals=tuple(signals), data=data)
    rec.validate()
    return rec
