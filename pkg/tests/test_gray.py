import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.stats import beta as beta_dist

from somnoline.errors import LengthMismatch
from somnoline.gray import (
    DEFAULT_GRAY_THRESHOLD,
    CertaintySeries,
    DegenerateData,
    GrayMask,
    ThresholdOutOfRange,
    apply_mask,
    certainty,
    fit_threshold,
    gray_mask_from_csv,
    gray_mask_to_csv,
    tag_gray,
)
from somnoline.staging import (
    GrayEntry,
    Hypnodensity,
    SleepStage,
    hypnodensity_to_hypnogram,
)


def random_hypnodensity(rng, n):
    return Hypnodensity(rows=rng.dirichlet(np.ones(5), size=n))


def analytic_crossing(a1, b1, a2, b2, w1=0.5):
    """Oracle: root of the true generative weighted-density difference."""

    def diff(t):
        return w1 * beta_dist.pdf(t, a1, b1) - (1 - w1) * beta_dist.pdf(t, a2, b2)

    lo = beta_dist.mean(a1, b1) + 1e-6
    hi = beta_dist.mean(a2, b2) - 1e-6
    return brentq(diff, lo, hi)


class TestCertainty:
    def test_one_hot(self):
        h = Hypnodensity(rows=np.array([[1, 0, 0, 0, 0]]))
        assert certainty(h).values[0] == 1.0

    def test_uniform(self):
        h = Hypnodensity(rows=np.array([[0.2] * 5]))
        assert certainty(h).values[0] == pytest.approx(0.2)

    def test_modal_probability(self):
        h = Hypnodensity(rows=np.array([[0.6, 0.3, 0.1, 0, 0]]))
        assert certainty(h).values[0] == pytest.approx(0.6)


class TestTagGray:
    def test_one_hot_never_gray(self):
        h = Hypnodensity(rows=np.eye(5)[np.zeros(20, dtype=int)])
        assert tag_gray(h, 0.73).gray_count == 0

    def test_uniform_always_gray(self):
        h = Hypnodensity(rows=np.full((20, 5), 0.2))
        mask = tag_gray(h, 0.73)
        assert mask.gray_count == 20
        assert mask.threshold_used == DEFAULT_GRAY_THRESHOLD

    def test_boundary_is_strict(self):
        h = Hypnodensity(rows=np.array([[0.73, 0.27, 0, 0, 0]]))
        assert tag_gray(h, 0.73).gray_count == 0

    def test_threshold_out_of_range(self):
        h = Hypnodensity(rows=np.array([[1, 0, 0, 0, 0]]))
        for bad in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(ThresholdOutOfRange):
                tag_gray(h, bad)

    def test_monotone_in_threshold(self):
        rng = np.random.default_rng(0)
        h = random_hypnodensity(rng, 300)
        previous = None
        for t in (0.05, 0.2, 0.4, 0.6, 0.73, 0.9, 0.99):
            flags = tag_gray(h, t).flags
            if previous is not None:
                assert np.all(previous <= flags), "raising threshold un-grayed an epoch"
            previous = flags

    def test_gray_fraction_is_cdf_below_threshold(self):
        rng = np.random.default_rng(1)
        h = random_hypnodensity(rng, 500)
        values = certainty(h).values
        for t in (0.3, 0.5, 0.73):
            assert tag_gray(h, t).gray_count == int((values < t).sum())


class TestApplyMask:
    def test_all_false_is_identity(self):
        rng = np.random.default_rng(2)
        h = random_hypnodensity(rng, 40)
        hyp = hypnodensity_to_hypnogram(h)
        star = apply_mask(hyp, GrayMask(flags=np.zeros(40, bool), threshold_used=0.5))
        assert star.entries == hyp.stages

    def test_all_true_is_all_gray(self):
        rng = np.random.default_rng(3)
        h = random_hypnodensity(rng, 40)
        hyp = hypnodensity_to_hypnogram(h)
        star = apply_mask(hyp, GrayMask(flags=np.ones(40, bool), threshold_used=0.5))
        assert all(isinstance(e, GrayEntry) for e in star.entries)
        assert tuple(e.suggested for e in star.entries) == hyp.stages

    def test_random_masks_elementwise(self):
        rng = np.random.default_rng(4)
        for _ in range(25):
            n = int(rng.integers(1, 60))
            h = random_hypnodensity(rng, n)
            hyp = hypnodensity_to_hypnogram(h)
            flags = rng.random(n) < 0.4
            star = apply_mask(hyp, GrayMask(flags=flags, threshold_used=0.5))
            for entry, stage, gray in zip(star.entries, hyp.stages, flags):
                if gray:
                    assert entry == GrayEntry(stage)
                else:
                    assert entry is stage

    def test_length_mismatch(self):
        h = Hypnodensity(rows=np.full((4, 5), 0.2))
        hyp = hypnodensity_to_hypnogram(h)
        with pytest.raises(LengthMismatch):
            apply_mask(hyp, GrayMask(flags=np.zeros(5, bool), threshold_used=0.5))


class TestFitThreshold:
    def test_recovers_analytic_crossing(self):
        expected = analytic_crossing(2, 8, 8, 2)
        assert expected == pytest.approx(0.5, abs=1e-9)
        rng = np.random.default_rng(42)
        samples = np.concatenate([rng.beta(2, 8, 5000), rng.beta(8, 2, 5000)])
        fit = fit_threshold(CertaintySeries(values=np.clip(samples, 0, 1)))
        assert abs(fit.fitted_threshold - expected) <= 0.05
        assert fit.converged

    def test_asymmetric_mixture(self):
        expected = analytic_crossing(2, 10, 9, 3)
        rng = np.random.default_rng(7)
        samples = np.concatenate([rng.beta(2, 10, 4000), rng.beta(9, 3, 4000)])
        fit = fit_threshold(CertaintySeries(values=np.clip(samples, 0, 1)))
        assert abs(fit.fitted_threshold - expected) <= 0.05

    def test_degenerate_data(self):
        with pytest.raises(DegenerateData):
            fit_threshold(CertaintySeries(values=np.full(50, 0.9)))

    def test_separated_clusters_threshold_inside(self):
        rng = np.random.default_rng(8)
        samples = np.clip(
            np.concatenate([np.full(80, 0.1), np.full(80, 0.95)])
            + rng.normal(0, 0.005, 160),
            0,
            1,
        )
        fit = fit_threshold(CertaintySeries(values=samples))
        assert 0.1 < fit.fitted_threshold < 0.95
        assert fit.low.mean < fit.fitted_threshold < fit.high.mean

    def test_permutation_invariant(self):
        rng = np.random.default_rng(9)
        samples = np.concatenate([rng.beta(2, 8, 500), rng.beta(8, 2, 500)])
        series = CertaintySeries(values=np.clip(samples, 0, 1))
        fit_a = fit_threshold(series)
        shuffled = samples.copy()
        rng.shuffle(shuffled)
        fit_b = fit_threshold(CertaintySeries(values=np.clip(shuffled, 0, 1)))
        assert fit_a.fitted_threshold == pytest.approx(fit_b.fitted_threshold, abs=1e-12)

    def test_weights_sum_to_one(self):
        rng = np.random.default_rng(10)
        samples = np.concatenate([rng.beta(3, 9, 600), rng.beta(9, 3, 300)])
        fit = fit_threshold(CertaintySeries(values=np.clip(samples, 0, 1)))
        assert fit.low.weight + fit.high.weight == pytest.approx(1.0)
        assert fit.low.weight > 0 and fit.high.weight > 0


class TestCsv:
    def test_round_trip(self):
        rng = np.random.default_rng(11)
        h = random_hypnodensity(rng, 25)
        series = certainty(h)
        mask = tag_gray(h, 0.73)
        text = gray_mask_to_csv(mask, series)
        mask2, series2 = gray_mask_from_csv(text)
        np.testing.assert_array_equal(mask2.flags, mask.flags)
        np.testing.assert_allclose(series2.values, series.values, atol=1e-15)
