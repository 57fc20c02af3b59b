"""Gray-area tagging: flag epochs whose scorer certainty falls below a threshold.

Certainty is the modal probability of the hypnodensity row. The threshold can
be fixed (pipeline default 0.73) or fitted by clustering certainties into a
low- and a high-agreement group with a two-component Beta mixture; the fitted
threshold is the crossing point of the weighted component densities, i.e. the
value where an epoch becomes more likely to belong to the uncertain group.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.stats import beta as beta_dist

from .errors import LengthMismatch, SomnolineError
from .staging import GrayEntry, Hypnodensity, Hypnogram, StarHypnogram

DEFAULT_GRAY_THRESHOLD = 0.73
_EPS = 1e-9
_MIN_SHAPE, _MAX_SHAPE = 1e-2, 1e4


class DegenerateData(SomnolineError):
    """All certainty values identical; a two-component fit is meaningless."""


class ThresholdOutOfRange(SomnolineError):
    """Gray threshold must lie strictly inside (0, 1)."""


@dataclass(eq=False)
class CertaintySeries:
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise SomnolineError("certainty series must be one-dimensional")
        if np.any(values < 0) or np.any(values > 1):
            raise SomnolineError("certainty values must lie in [0, 1]")
        self.values = values

    def __len__(self) -> int:
        return len(self.values)


@dataclass(eq=False)
class GrayMask:
    flags: np.ndarray
    threshold_used: float | None

    def __post_init__(self):
        self.flags = np.asarray(self.flags, dtype=bool)

    def __len__(self) -> int:
        return len(self.flags)

    @property
    def gray_count(self) -> int:
        return int(self.flags.sum())


@dataclass(frozen=True)
class BetaComponent:
    alpha: float
    beta: float
    weight: float

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)

    @property
    def variance(self) -> float:
        s = self.alpha + self.beta
        return self.alpha * self.beta / (s * s * (s + 1))


@dataclass(frozen=True)
class MixtureFit:
    low: BetaComponent
    high: BetaComponent
    fitted_threshold: float
    iterations: int
    converged: bool
    log_likelihood: float


def certainty(h: Hypnodensity) -> CertaintySeries:
    """Modal stage probability per epoch."""
    return CertaintySeries(values=h.rows.max(axis=1))


def _moment_match(mean: float, var: float) -> tuple[float, float]:
    var = max(var, 1e-6)
    common = max(mean * (1 - mean) / var - 1.0, 1e-3)
    a = np.clip(mean * common, _MIN_SHAPE, _MAX_SHAPE)
    b = np.clip((1 - mean) * common, _MIN_SHAPE, _MAX_SHAPE)
    return float(a), float(b)


def fit_threshold(
    c: CertaintySeries, max_iter: int = 200, tol: float = 1e-8
) -> MixtureFit:
    """EM fit of a two-component Beta mixture over certainty values.

    Initialization splits the sorted sample at its median rank and
    moment-matches each half; M-steps re-match moments under the current
    responsibilities. Convergence is a log-likelihood delta below ``tol``.
    """
    x = np.sort(np.asarray(c.values, dtype=np.float64))
    if len(x) < 2 or x[0] == x[-1]:
        raise DegenerateData("certainty values must contain >= 2 distinct values")
    x = np.clip(x, _EPS, 1 - _EPS)

    half = len(x) // 2
    params = [
        _moment_match(float(np.mean(p)), float(np.var(p)))
        for p in (x[:half], x[half:])
    ]
    weights = np.array([half / len(x), (len(x) - half) / len(x)])

    log_lik = -np.inf
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        log_dens = np.stack(
            [
                np.log(weights[k]) + beta_dist.logpdf(x, *params[k])
                for k in range(2)
            ]
        )
        top = log_dens.max(axis=0)
        log_total = top + np.log(np.exp(log_dens - top).sum(axis=0))
        resp = np.exp(log_dens - log_total)

        new_log_lik = float(log_total.sum())
        weights = resp.mean(axis=1)
        for k in range(2):
            r = resp[k]
            total = r.sum()
            if total < _EPS:
                continue
            mean = float((r * x).sum() / total)
            var = float((r * (x - mean) ** 2).sum() / total)
            params[k] = _moment_match(mean, var)

        if abs(new_log_lik - log_lik) < tol:
            log_lik = new_log_lik
            converged = True
            break
        log_lik = new_log_lik

    components = sorted(
        (
            BetaComponent(alpha=a, beta=b, weight=float(w))
            for (a, b), w in zip(params, weights)
        ),
        key=lambda comp: comp.mean,
    )
    low, high = components
    threshold = _density_crossing(low, high)
    return MixtureFit(
        low=low,
        high=high,
        fitted_threshold=threshold,
        iterations=iterations,
        converged=converged,
        log_likelihood=log_lik,
    )


def _density_crossing(low: BetaComponent, high: BetaComponent) -> float:
    """Certainty value between the component means where the weighted densities meet."""

    def diff(t: float) -> float:
        return low.weight * beta_dist.pdf(t, low.alpha, low.beta) - (
            high.weight * beta_dist.pdf(t, high.alpha, high.beta)
        )

    lo = low.mean + 1e-6
    hi = high.mean - 1e-6
    if lo >= hi:
        return (low.mean + high.mean) / 2
    grid = np.linspace(lo, hi, 512)
    values = np.array([diff(t) for t in grid])
    signs = np.sign(values)
    flips = np.nonzero(signs[:-1] * signs[1:] < 0)[0]
    if len(flips):
        i = flips[0]
        return float(brentq(diff, grid[i], grid[i + 1]))
    # no sign change (extreme weights); fall back to the closest approach
    return float(grid[int(np.argmin(np.abs(values)))])


def tag_gray(
    h: Hypnodensity, threshold: float = DEFAULT_GRAY_THRESHOLD
) -> GrayMask:
    """Flag epochs with certainty strictly below the threshold."""
    if not 0 < threshold < 1:
        raise ThresholdOutOfRange(f"threshold must be in (0, 1), got {threshold}")
    series = certainty(h)
    return GrayMask(flags=series.values < threshold, threshold_used=threshold)


def apply_mask(hyp: Hypnogram, mask: GrayMask) -> StarHypnogram:
    """Replace gray epochs with whitespace entries carrying the suggested stage."""
    if len(hyp) != len(mask):
        raise LengthMismatch(
            f"hypnogram has {len(hyp)} epochs, mask has {len(mask)}"
        )
    entries = tuple(
        GrayEntry(stage) if gray else stage
        for stage, gray in zip(hyp.stages, mask.flags)
    )
    return StarHypnogram(entries=entries, epoch_length_s=hyp.epoch_length_s)


# --- CSV interchange -------------------------------------------------------

def gray_mask_to_csv(mask: GrayMask, series: CertaintySeries) -> str:
    if len(mask) != len(series):
        raise LengthMismatch("mask and certainty series differ in length")
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["epoch_index", "is_gray", "certainty"])
    for i, (flag, value) in enumerate(zip(mask.flags, series.values)):
        writer.writerow([i, int(flag), format(value, ".17g")])
    return out.getvalue()


def gray_mask_from_csv(text: str) -> tuple[GrayMask, CertaintySeries]:
    flags = []
    values = []
    reader = csv.reader(io.StringIO(text))
    for i, row in enumerate(reader):
        if not row or (i == 0 and row[0].strip() == "epoch_index"):
            continue
        flags.append(bool(int(row[1])))
        values.append(float(row[2]))
    if not flags:
        raise SomnolineError("gray mask CSV has no rows")
    return (
        GrayMask(flags=np.array(flags), threshold_used=None),
        CertaintySeries(values=np.array(values)),
    )
