import numpy as np
import pytest

from somnoline.scoring import (
    DEFAULT_WEIGHTS,
    ChannelMissing,
    EpochFeatures,
    PrecomputedLengthMismatch,
    ScorerKind,
    ScorerSpec,
    epoch_count,
    extract_epoch_features,
    score,
    validate_hypnodensity,
)
from somnoline.staging import (
    Hypnodensity,
    InvalidProbabilityRow,
    SleepStage,
    hypnodensity_to_csv,
    hypnodensity_to_hypnogram,
)
from somnoline.synth import make_signal_recording


def sine_recording(freq_hz=2.0, fs=100.0, seconds=120, amplitude=50.0, phase=0.5):
    t = np.arange(int(fs * seconds)) / fs
    return make_signal_recording(
        amplitude * np.sin(2 * np.pi * freq_hz * t + phase), fs
    )


class TestPrecomputed:
    def test_passthrough(self, tmp_path):
        rec = sine_recording(seconds=120)
        rng = np.random.default_rng(0)
        h = Hypnodensity(rows=rng.dirichlet(np.ones(5), size=4))
        path = tmp_path / "h.csv"
        path.write_text(hypnodensity_to_csv(h))
        spec = ScorerSpec(kind=ScorerKind.PRECOMPUTED, source=path)
        out = score(rec, spec, epoch_length_s=30.0)
        np.testing.assert_allclose(out.rows, h.rows, atol=1e-15)

    def test_row_count_mismatch(self, tmp_path):
        rec = sine_recording(seconds=120)  # 4 epochs
        rng = np.random.default_rng(1)
        h = Hypnodensity(rows=rng.dirichlet(np.ones(5), size=3))
        path = tmp_path / "h.csv"
        path.write_text(hypnodensity_to_csv(h))
        spec = ScorerSpec(kind=ScorerKind.PRECOMPUTED, source=path)
        with pytest.raises(PrecomputedLengthMismatch):
            score(rec, spec, epoch_length_s=30.0)

    def test_invalid_rows_rejected(self, tmp_path):
        rec = sine_recording(seconds=60)
        path = tmp_path / "h.csv"
        path.write_text("epoch_index,pW,pN1,pN2,pN3,pREM\n0,1,0,0,0,0\n1,0.7,0.7,0,0,0\n")
        spec = ScorerSpec(kind=ScorerKind.PRECOMPUTED, source=path)
        with pytest.raises(InvalidProbabilityRow):
            score(rec, spec, epoch_length_s=30.0)


class TestBaseline:
    def test_pure_delta_sine_scores_n3(self):
        # A 2 Hz sine completes 60 full cycles per 30 s epoch, so its entire
        # spectral mass sits in the 2 Hz bin: relative band powers are exactly
        # (delta, theta, alpha, beta) = (1, 0, 0, 0). Evaluating the default
        # linear rule by hand with zcr in its widest possible range [0, 1]:
        #   N3 logit = 5.0;  N2 = 2.0;  N1 = 0;  W <= 2*zcr <= 2*0.05 here;
        #   REM <= 3*zcr. A 2 Hz sine crosses zero 4 times per second, so
        #   zcr ~= 4/fs = 0.04 and every competitor stays below 5.0.
        rec = sine_recording(freq_hz=2.0, fs=100.0, seconds=300)
        spec = ScorerSpec(kind=ScorerKind.BASELINE, channel_label="EEG C4-M1")
        h = score(rec, spec, epoch_length_s=30.0)
        assert len(h) == 10
        hyp = hypnodensity_to_hypnogram(h)
        assert all(s == SleepStage.N3 for s in hyp.stages)
        # hand-computed logits for (1, 0, 0, 0) band powers and measured zcr
        per_epoch = 3000
        samples = rec.signal_physical(0)
        for e in range(10):
            x = samples[e * per_epoch : (e + 1) * per_epoch]
            x = x - x.mean()
            zcr = np.count_nonzero(x[:-1] * x[1:] < 0) / (per_epoch - 1)
            assert abs(zcr - 0.04) < 0.002
            var_norm = np.var(x) / (1 + np.var(x))
            logits = DEFAULT_WEIGHTS @ np.array([1.0, 0, 0, 0, var_norm, zcr])
            expected = np.exp(logits) / np.exp(logits).sum()
            np.testing.assert_allclose(h.rows[e], expected, atol=1e-3)

    def test_alpha_sine_scores_wake(self):
        rec = sine_recording(freq_hz=10.0, fs=100.0, seconds=120)
        spec = ScorerSpec(kind=ScorerKind.BASELINE, channel_label="EEG C4-M1")
        hyp = hypnodensity_to_hypnogram(score(rec, spec, epoch_length_s=30.0))
        assert all(s == SleepStage.W for s in hyp.stages)

    def test_channel_missing(self):
        rec = sine_recording()
        spec = ScorerSpec(kind=ScorerKind.BASELINE, channel_label="EOG E1-M2")
        with pytest.raises(ChannelMissing):
            score(rec, spec)

    def test_deterministic(self):
        rec = sine_recording(seconds=90)
        spec = ScorerSpec(kind=ScorerKind.BASELINE, channel_label="EEG C4-M1")
        a = score(rec, spec, epoch_length_s=30.0)
        b = score(rec, spec, epoch_length_s=30.0)
        assert a == b

    def test_trailing_partial_epoch_dropped(self):
        rec = sine_recording(seconds=100)  # 3 whole 30 s epochs + 10 s
        assert epoch_count(rec, 30.0) == 3
        spec = ScorerSpec(kind=ScorerKind.BASELINE, channel_label="EEG C4-M1")
        assert len(score(rec, spec, epoch_length_s=30.0)) == 3


class TestFeatures:
    def test_band_powers_sum_below_one(self):
        rng = np.random.default_rng(2)
        samples = rng.normal(0, 1, size=3000)
        (f,) = extract_epoch_features(samples, 100.0, 30.0)
        assert 0 <= f.delta and 0 <= f.theta and 0 <= f.alpha and 0 <= f.beta
        assert f.delta + f.theta + f.alpha + f.beta <= 1 + 1e-6

    def test_flat_signal_yields_zero_bands(self):
        (f,) = extract_epoch_features(np.full(3000, 7.0), 100.0, 30.0)
        assert (f.delta, f.theta, f.alpha, f.beta) == (0.0, 0.0, 0.0, 0.0)
        assert f.zero_crossing_rate == 0.0

    def test_invalid_band_powers_rejected(self):
        with pytest.raises(Exception):
            EpochFeatures(delta=0.9, theta=0.9, alpha=0, beta=0,
                          variance=1.0, zero_crossing_rate=0.1)


class TestValidation:
    def test_valid_passes(self):
        rng = np.random.default_rng(3)
        h = Hypnodensity(rows=rng.dirichlet(np.ones(5), size=8))
        validate_hypnodensity(h, 8)

    def test_property_sweep(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            n = int(rng.integers(1, 30))
            h = Hypnodensity(rows=rng.dirichlet(np.ones(5), size=n))
            validate_hypnodensity(h, n)
            with pytest.raises(PrecomputedLengthMismatch):
                validate_hypnodensity(h, n + 1)
        for _ in range(50):
            rows = rng.dirichlet(np.ones(5), size=4)
            rows[2, int(rng.integers(0, 5))] += float(rng.uniform(1e-4, 0.5))
            with pytest.raises(InvalidProbabilityRow):
                Hypnodensity(rows=rows)
