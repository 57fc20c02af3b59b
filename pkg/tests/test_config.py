import numpy as np
import pytest

from somnoline.config import AppConfig, load_config
from somnoline.errors import SomnolineError
from somnoline.scoring import ScorerKind


FULL_INI = """
[service]
listen = 0.0.0.0:9001
storage_root = /srv/psg
internal_secret = s3cret
user_file = /srv/users.json
token_ttl_s = 7200

[queue]
split_log = /srv/q/split.log
process_log = /srv/q/process.log
max_attempts = 5
lease_s = 120

[split]
gap_threshold_s = 1800

[gray]
threshold = 0.65

[scorer]
kind = baseline
channel = EOG E1-M2
coefficients = {"weights": [[1,0,0,0,0,0],[0,1,0,0,0,0],[0,0,1,0,0,0],[0,0,0,1,0,0],[0,0,0,0,1,0]], "bias": [0.1,0,0,0,0]}

[worker]
frontend_url = http://front:9001
epoch_length_s = 20
"""


class TestLoadConfig:
    def test_defaults_without_file(self):
        cfg = load_config(None)
        assert cfg.gray_threshold == 0.73
        assert cfg.gap_threshold_s == 3600.0
        assert cfg.queue.max_attempts == 3
        assert cfg.service.listen_port == 8645

    def test_missing_file_raises(self, tmp_path):
        with pytest.raises(SomnolineError):
            load_config(tmp_path / "nope.ini")

    def test_full_file(self, tmp_path):
        path = tmp_path / "somnoline.ini"
        path.write_text(FULL_INI)
        cfg = load_config(path)
        assert cfg.service.listen_host == "0.0.0.0"
        assert cfg.service.listen_port == 9001
        assert cfg.service.internal_secret == "s3cret"
        assert cfg.service.token_ttl_s == 7200
        assert str(cfg.queue.split_log) == "/srv/q/split.log"
        assert cfg.queue.max_attempts == 5
        assert cfg.queue.lease_s == 120
        assert cfg.gap_threshold_s == 1800
        assert cfg.gray_threshold == 0.65
        assert cfg.frontend_url == "http://front:9001"
        assert cfg.epoch_length_s == 20

    def test_scorer_spec_with_coefficients(self, tmp_path):
        path = tmp_path / "somnoline.ini"
        path.write_text(FULL_INI)
        spec = load_config(path).scorer.to_spec()
        assert spec.kind is ScorerKind.BASELINE
        assert spec.channel_label == "EOG E1-M2"
        np.testing.assert_array_equal(spec.weights, np.eye(5, 6))
        assert spec.bias[0] == pytest.approx(0.1)

    def test_precomputed_requires_source(self, tmp_path):
        path = tmp_path / "somnoline.ini"
        path.write_text("[scorer]\nkind = precomputed\n")
        with pytest.raises(SomnolineError):
            load_config(path).scorer.to_spec()
        path.write_text("[scorer]\nkind = precomputed\nsource = /srv/pre\n")
        spec = load_config(path).scorer.to_spec()
        assert spec.kind is ScorerKind.PRECOMPUTED
        assert str(spec.source) == "/srv/pre"

    def test_bad_coefficients_rejected(self, tmp_path):
        path = tmp_path / "somnoline.ini"
        path.write_text("[scorer]\ncoefficients = not json\n")
        with pytest.raises(SomnolineError):
            load_config(path)

    def test_partial_file_keeps_other_defaults(self, tmp_path):
        path = tmp_path / "somnoline.ini"
        path.write_text("[gray]\nthreshold = 0.5\n")
        cfg = load_config(path)
        assert cfg.gray_threshold == 0.5
        assert cfg.queue.max_attempts == AppConfig().queue.max_attempts
