"""Pluggable automatic sleep-stage scorer producing hypnodensities.

Two scorer kinds exist: ``precomputed`` ingests an externally produced
hypnodensity CSV (the integration point for a real staging network), and
``baseline`` is a transparent spectral stand-in: per-epoch relative band
powers, variance, and zero-crossing rate pushed through a fixed
softmax-normalized linear rule. The baseline makes no clinical claim; its
coefficients are configuration so the mapping stays auditable.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .edf import EdfRecording
from .errors import SomnolineError
from .staging import (
    DEFAULT_EPOCH_LENGTH_S,
    STAGE_COUNT,
    Hypnodensity,
    InvalidProbabilityRow,
    hypnodensity_from_csv,
    validate_probability_rows,
)

FREQUENCY_BANDS_HZ = {
    "delta": (0.5, 4.0),
    "theta": (4.0, 8.0),
    "alpha": (8.0, 13.0),
    "beta": (13.0, 30.0),
}

# Feature order: delta, theta, alpha, beta, variance/(1+variance), zero-crossing
# rate. Rows are stage logits in W, N1, N2, N3, REM order. Delta-dominant epochs
# land in N3, alpha/beta-rich epochs in W; the variance column is unused by
# default but kept addressable for tuning.
DEFAULT_WEIGHTS = np.array(
    [
        [0.0, 0.0, 4.0, 4.0, 0.0, 2.0],  # W
        [0.0, 3.0, 1.0, 0.0, 0.0, 0.0],  # N1
        [2.0, 2.0, 0.0, 0.0, 0.0, 0.0],  # N2
        [5.0, 0.0, 0.0, 0.0, 0.0, 0.0],  # N3
        [0.0, 2.0, 0.0, 1.0, 0.0, 3.0],  # REM
    ]
)
DEFAULT_BIAS = np.zeros(STAGE_COUNT)


class ChannelMissing(SomnolineError):
    """Baseline scorer's channel label is not present in the recording."""


class PrecomputedLengthMismatch(SomnolineError):
    """Precomputed hypnodensity row count differs from the epoch count."""


class ScorerKind(enum.Enum):
    PRECOMPUTED = "precomputed"
    BASELINE = "baseline"


@dataclass(frozen=True)
class ScorerSpec:
    kind: ScorerKind
    source: Path | None = None
    channel_label: str | None = None
    weights: np.ndarray | None = None
    bias: np.ndarray | None = None

    def __post_init__(self):
        if self.kind is ScorerKind.PRECOMPUTED and self.source is None:
            raise SomnolineError("precomputed scorer requires a source path")
        if self.kind is ScorerKind.BASELINE and not self.channel_label:
            raise SomnolineError("baseline scorer requires a channel label")


@dataclass(frozen=True)
class EpochFeatures:
    """Relative band powers plus broadband shape features for one epoch."""

    delta: float
    theta: float
    alpha: float
    beta: float
    variance: float
    zero_crossing_rate: float

    def __post_init__(self):
        bands = (self.delta, self.theta, self.alpha, self.beta)
        if any(b < 0 for b in bands) or sum(bands) > 1 + 1e-6:
            raise SomnolineError(f"relative band powers invalid: {bands}")

    def vector(self) -> np.ndarray:
        return np.array(
            [
                self.delta,
                self.theta,
                self.alpha,
                self.beta,
                self.variance / (1.0 + self.variance),
                self.zero_crossing_rate,
            ]
        )


def epoch_count(rec: EdfRecording, epoch_length_s: float) -> int:
    return int(rec.duration_s() // epoch_length_s)


def extract_epoch_features(
    samples: np.ndarray, sampling_rate: float, epoch_length_s: float
) -> list[EpochFeatures]:
    """Features for each whole epoch; a trailing partial epoch is dropped."""
    per_epoch = int(round(sampling_rate * epoch_length_s))
    n_epochs = len(samples) // per_epoch
    freqs = np.fft.rfftfreq(per_epoch, d=1.0 / sampling_rate)
    band_bins = {
        name: (freqs >= lo) & (freqs < hi) & (freqs > 0)
        for name, (lo, hi) in FREQUENCY_BANDS_HZ.items()
    }
    nonzero = freqs > 0

    features = []
    for e in range(n_epochs):
        x = samples[e * per_epoch : (e + 1) * per_epoch]
        x = x - x.mean()
        power = np.abs(np.fft.rfft(x)) ** 2
        total = power[nonzero].sum()
        if total > 0:
            rel = {name: power[bins].sum() / total for name, bins in band_bins.items()}
        else:
            rel = {name: 0.0 for name in band_bins}
        crossings = int(np.count_nonzero(x[:-1] * x[1:] < 0))
        features.append(
            EpochFeatures(
                delta=rel["delta"],
                theta=rel["theta"],
                alpha=rel["alpha"],
                beta=rel["beta"],
                variance=float(np.var(x)),
                zero_crossing_rate=crossings / max(len(x) - 1, 1),
            )
        )
    return features


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=-1, keepdims=True)


def score(
    rec: EdfRecording,
    spec: ScorerSpec,
    epoch_length_s: float = DEFAULT_EPOCH_LENGTH_S,
) -> Hypnodensity:
    """Hypnodensity with one row per whole epoch of the recording."""
    expected = epoch_count(rec, epoch_length_s)
    if spec.kind is ScorerKind.PRECOMPUTED:
        h = hypnodensity_from_csv(
            Path(spec.source).read_text(), epoch_length_s=epoch_length_s
        )
        validate_hypnodensity(h, expected)
        return h

    index = rec.find_signal(spec.channel_label)
    if index is None:
        present = [s.label.strip() for s in rec.signals]
        raise ChannelMissing(
            f"channel {spec.channel_label!r} not in recording (has {present})"
        )
    samples = rec.signal_physical(index)
    features = extract_epoch_features(
        samples, rec.sampling_frequency(index), epoch_length_s
    )
    weights = DEFAULT_WEIGHTS if spec.weights is None else np.asarray(spec.weights)
    bias = DEFAULT_BIAS if spec.bias is None else np.asarray(spec.bias)
    vectors = np.stack([f.vector() for f in features])
    rows = _softmax(vectors @ weights.T + bias)
    h = Hypnodensity(rows=rows, epoch_length_s=epoch_length_s)
    validate_hypnodensity(h, expected)
    return h


def validate_hypnodensity(h: Hypnodensity, expected_epochs: int) -> None:
    if len(h) != expected_epochs:
        raise PrecomputedLengthMismatch(
            f"hypnodensity has {len(h)} rows, recording has {expected_epochs} epochs"
        )
    validate_probability_rows(h.rows)
