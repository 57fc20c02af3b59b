"""Synthetic PSG generation for benchmarks and end-to-end fixtures.

Signals are EEG-flavored only in spectrum (a wandering dominant band plus
noise), which is enough to drive the baseline scorer into varied, partly
uncertain hypnodensities.
"""
from __future__ import annotations

from datetime import datetime
from typing import Sequence

import numpy as np

from .edf import (
    EdfHeader,
    EdfRecording,
    SignalHeader,
    encode_timekeeping_tal,
    make_annotation_signal,
)

DEFAULT_START = datetime(2023, 8, 2, 22, 0, 0)
DEFAULT_CHANNEL = "EEG C4-M1"
ANNOTATION_SPR = 12

_BAND_CENTERS_HZ = (2.0, 6.0, 10.0, 20.0)


def physical_to_digital(
    samples: np.ndarray, phys_min: float, phys_max: float
) -> np.ndarray:
    clipped = np.clip(samples, phys_min, phys_max)
    gain = (phys_max - phys_min) / 65535.0
    return np.round((clipped - phys_min) / gain - 32768.0).astype("<i2")


def wandering_band_signal(
    rng: np.random.Generator,
    n_samples: int,
    sampling_rate: float,
    epoch_length_s: float = 30.0,
    amplitude: float = 60.0,
) -> np.ndarray:
    """Per-epoch dominant sinusoid with drifting band choice plus noise."""
    per_epoch = int(round(sampling_rate * epoch_length_s))
    t = np.arange(n_samples) / sampling_rate
    out = rng.normal(0.0, amplitude * 0.2, size=n_samples)
    band = int(rng.integers(0, len(_BAND_CENTERS_HZ)))
    for start in range(0, n_samples, per_epoch):
        if rng.random() < 0.3:
            band = int(rng.integers(0, len(_BAND_CENTERS_HZ)))
        stop = min(start + per_epoch, n_samples)
        freq = _BAND_CENTERS_HZ[band] * float(rng.uniform(0.9, 1.1))
        depth = float(rng.uniform(0.4, 1.0))
        out[start:stop] += amplitude * depth * np.sin(
            2 * np.pi * freq * t[start:stop] + rng.uniform(0, 2 * np.pi)
        )
    return out


def make_signal_recording(
    physical_samples: np.ndarray,
    sampling_rate: float,
    *,
    channel_label: str = DEFAULT_CHANNEL,
    record_duration_s: float = 1.0,
    start_datetime: datetime = DEFAULT_START,
    phys_range: tuple[float, float] = (-200.0, 200.0),
) -> EdfRecording:
    """Single-channel continuous EDF; trailing samples not filling a record are dropped."""
    spr = int(round(sampling_rate * record_duration_s))
    n_records = len(physical_samples) // spr
    signal = SignalHeader.build(
        label=channel_label,
        samples_per_record=spr,
        phys_min=phys_range[0],
        phys_max=phys_range[1],
        physical_dim="uV",
    )
    header = EdfHeader.build(
        start_datetime=start_datetime,
        record_count=n_records,
        record_duration_s=record_duration_s,
        signal_count=1,
    )
    digital = physical_to_digital(
        physical_samples[: n_records * spr], *phys_range
    ).reshape(n_records, spr)
    return EdfRecording(header=header, signals=(signal,), data=digital)


def synthesize_multi_night(
    *,
    nights: int = 3,
    night_s: float = 8 * 3600.0,
    gap_s: float = 16 * 3600.0,
    sampling_rate: float = 64.0,
    n_channels: int = 1,
    record_duration_s: float = 10.0,
    start_datetime: datetime = DEFAULT_START,
    seed: int = 0,
) -> EdfRecording:
    """EDF+D holding several nights separated by onset gaps."""
    rng = np.random.default_rng(seed)
    spr = int(round(sampling_rate * record_duration_s))
    per_night = int(night_s // record_duration_s)
    total = per_night * nights

    signals = tuple(
        SignalHeader.build(
            label=f"{DEFAULT_CHANNEL}" if i == 0 else f"EEG ch{i}",
            samples_per_record=spr,
            phys_min=-200.0,
            phys_max=200.0,
            physical_dim="uV",
        )
        for i in range(n_channels)
    ) + (make_annotation_signal(ANNOTATION_SPR),)

    header = EdfHeader.build(
        start_datetime=start_datetime,
        record_count=total,
        record_duration_s=record_duration_s,
        signal_count=len(signals),
        reserved="EDF+D",
    )

    data = np.empty((total, n_channels * spr + ANNOTATION_SPR), dtype="<i2")
    for ch in range(n_channels):
        phys = wandering_band_signal(rng, total * spr, sampling_rate)
        data[:, ch * spr : (ch + 1) * spr] = physical_to_digital(
            phys, -200.0, 200.0
        ).reshape(total, spr)

    onset = 0.0
    for row in range(total):
        data[row, n_channels * spr :] = encode_timekeeping_tal(onset, ANNOTATION_SPR)
        onset += record_duration_s
        if row % per_night == per_night - 1:
            onset += gap_s
    return EdfRecording(header=header, signals=signals, data=data)


def channels_for_target_size(
    target_mo: float,
    *,
    nights: int = 3,
    night_s: float = 8 * 3600.0,
    sampling_rate: float = 64.0,
    record_duration_s: float = 10.0,
) -> int:
    """Channel count so the multi-night file lands near target_mo megabytes."""
    records = int(night_s // record_duration_s) * nights
    spr = int(round(sampling_rate * record_duration_s))
    bytes_per_channel = records * spr * 2
    overhead = records * ANNOTATION_SPR * 2
    return max(1, round((target_mo * 1_000_000 - overhead) / bytes_per_channel))
