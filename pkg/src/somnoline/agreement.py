"""Fleiss multi-rater kappa over hypnograms, full or restricted to gray epochs.

Implements the classic fixed-marginal multi-rater coefficient
(Fleiss 1971): kappa = (P_bar - Pe_bar) / (1 - Pe_bar), with per-epoch
agreement P_i = (sum_j n_ij^2 - R) / (R (R - 1)) and chance agreement from the
squared category marginals. Kappa can be negative when observed agreement
falls below chance; that is reported, not clipped.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import LengthMismatch, SomnolineError
from .gray import GrayMask
from .staging import STAGE_COUNT, Hypnogram


class SingleRater(SomnolineError):
    """Fleiss kappa needs at least two raters."""


class DegenerateMarginals(SomnolineError):
    """All ratings in one category but agreement imperfect: kappa is 0/0."""


class EmptyMask(SomnolineError):
    """Gray-only kappa needs at least one gray epoch."""


class EmptyList(SomnolineError):
    """Summary statistics need at least one value."""


@dataclass(eq=False)
class RatingMatrix:
    """Epochs x categories rating counts over a fixed rater panel."""

    counts: np.ndarray
    raters: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] < 1:
            raise SomnolineError("counts must be a non-empty 2-D matrix")
        if np.any(counts < 0):
            raise SomnolineError("rating counts must be non-negative")
        if self.raters < 2:
            raise SingleRater(f"need >= 2 raters, got {self.raters}")
        row_sums = counts.sum(axis=1)
        if np.any(row_sums != self.raters):
            bad = int(np.argmax(row_sums != self.raters))
            raise SomnolineError(
                f"row {bad} sums to {row_sums[bad]}, expected {self.raters} ratings"
            )
        self.counts = counts

    @property
    def n_epochs(self) -> int:
        return self.counts.shape[0]


@dataclass(frozen=True)
class KappaReport:
    overall_kappa: float
    gray_only_kappa: float | None
    n_epochs: int
    n_gray_epochs: int


def build_rating_matrix(hypnograms: Sequence[Hypnogram]) -> RatingMatrix:
    """Tally stage assignments per epoch across raters."""
    if len(hypnograms) < 2:
        raise SingleRater("need hypnograms from >= 2 raters")
    length = len(hypnograms[0])
    counts = np.zeros((length, STAGE_COUNT), dtype=np.int64)
    for hyp in hypnograms:
        if len(hyp) != length:
            raise LengthMismatch(
                f"hypnograms disagree on length: {len(hyp)} vs {length}"
            )
        codes = np.fromiter((s.value for s in hyp.stages), dtype=np.int64, count=length)
        np.add.at(counts, (np.arange(length), codes), 1)
    return RatingMatrix(counts=counts, raters=len(hypnograms))


def fleiss_kappa(m: RatingMatrix) -> float:
    counts = m.counts.astype(np.float64)
    n, r = m.n_epochs, m.raters
    p_i = ((counts**2).sum(axis=1) - r) / (r * (r - 1))
    p_bar = p_i.mean()
    marginals = counts.sum(axis=0) / (n * r)
    pe_bar = float((marginals**2).sum())
    if pe_bar == 1.0:
        if p_bar == 1.0:
            return 1.0
        raise DegenerateMarginals(
            "all ratings fall in one category; kappa is undefined"
        )
    return float((p_bar - pe_bar) / (1.0 - pe_bar))


def kappa_on_mask(m: RatingMatrix, mask: GrayMask) -> float:
    """Fleiss kappa over only the epochs flagged by the mask."""
    if len(mask) != m.n_epochs:
        raise LengthMismatch(
            f"mask covers {len(mask)} epochs, matrix has {m.n_epochs}"
        )
    if mask.gray_count == 0:
        raise EmptyMask("mask selects no epochs")
    subset = RatingMatrix(counts=m.counts[mask.flags], raters=m.raters)
    return fleiss_kappa(subset)


def summarize(kappas: Sequence[float]) -> tuple[float, float]:
    """Mean and sample standard deviation (n-1); a single value has sd 0."""
    if len(kappas) == 0:
        raise EmptyList("no kappa values to summarize")
    mean = float(np.mean(kappas))
    if len(kappas) == 1:
        return mean, 0.0
    sd = math.sqrt(sum((k - mean) ** 2 for k in kappas) / (len(kappas) - 1))
    return mean, sd
