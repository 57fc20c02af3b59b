"""INI configuration shared by the CLI, service, and workers."""
from __future__ import annotations

import configparser
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .edf import DEFAULT_GAP_THRESHOLD_S
from .errors import SomnolineError
from .gray import DEFAULT_GRAY_THRESHOLD
from .queueing import DEFAULT_LEASE_S, DEFAULT_MAX_ATTEMPTS
from .scoring import ScorerKind, ScorerSpec
from .staging import DEFAULT_EPOCH_LENGTH_S

DEFAULT_TOKEN_TTL_S = 12 * 3600.0


@dataclass
class ServiceConfig:
    listen_host: str = "127.0.0.1"
    listen_port: int = 8645
    storage_root: Path = Path("data/storage")
    internal_secret: str = "internal-dev-secret"
    user_file: Path = Path("data/users.json")
    token_ttl_s: float = DEFAULT_TOKEN_TTL_S


@dataclass
class QueueConfig:
    split_log: Path = Path("data/queues/split.log")
    process_log: Path = Path("data/queues/process.log")
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    lease_s: float = DEFAULT_LEASE_S


@dataclass
class ScorerConfig:
    kind: str = "baseline"
    channel: str = "EEG C4-M1"
    source: Path | None = None
    weights: list | None = None
    bias: list | None = None

    def to_spec(self) -> ScorerSpec:
        if self.kind == "precomputed":
            if self.source is None:
                raise SomnolineError("[scorer] kind=precomputed requires source")
            return ScorerSpec(kind=ScorerKind.PRECOMPUTED, source=self.source)
        if self.kind == "baseline":
            return ScorerSpec(
                kind=ScorerKind.BASELINE,
                channel_label=self.channel,
                weights=None if self.weights is None else np.asarray(self.weights),
                bias=None if self.bias is None else np.asarray(self.bias),
            )
        raise SomnolineError(f"unknown scorer kind {self.kind!r}")


@dataclass
class AppConfig:
    service: ServiceConfig = field(default_factory=ServiceConfig)
    queue: QueueConfig = field(default_factory=QueueConfig)
    scorer: ScorerConfig = field(default_factory=ScorerConfig)
    gray_threshold: float = DEFAULT_GRAY_THRESHOLD
    gap_threshold_s: float = DEFAULT_GAP_THRESHOLD_S
    epoch_length_s: float = DEFAULT_EPOCH_LENGTH_S
    frontend_url: str = "http://127.0.0.1:8645"


def load_config(path: str | Path | None) -> AppConfig:
    """Parse an INI config; every key is optional and falls back to defaults."""
    cfg = AppConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise SomnolineError(f"config file {path} not found")

    if parser.has_section("service"):
        s = parser["service"]
        listen = s.get("listen", f"{cfg.service.listen_host}:{cfg.service.listen_port}")
        host, _, port = listen.rpartition(":")
        cfg.service.listen_host = host or cfg.service.listen_host
        cfg.service.listen_port = int(port)
        cfg.service.storage_root = Path(s.get("storage_root", str(cfg.service.storage_root)))
        cfg.service.internal_secret = s.get("internal_secret", cfg.service.internal_secret)
        cfg.service.user_file = Path(s.get("user_file", str(cfg.service.user_file)))
        cfg.service.token_ttl_s = s.getfloat("token_ttl_s", cfg.service.token_ttl_s)
    if parser.has_section("queue"):
        s = parser["queue"]
        cfg.queue.split_log = Path(s.get("split_log", str(cfg.queue.split_log)))
        cfg.queue.process_log = Path(s.get("process_log", str(cfg.queue.process_log)))
        cfg.queue.max_attempts = s.getint("max_attempts", cfg.queue.max_attempts)
        cfg.queue.lease_s = s.getfloat("lease_s", cfg.queue.lease_s)
    if parser.has_section("split"):
        cfg.gap_threshold_s = parser["split"].getfloat(
            "gap_threshold_s", cfg.gap_threshold_s
        )
    if parser.has_section("gray"):
        cfg.gray_threshold = parser["gray"].getfloat("threshold", cfg.gray_threshold)
    if parser.has_section("scorer"):
        s = parser["scorer"]
        cfg.scorer.kind = s.get("kind", cfg.scorer.kind)
        cfg.scorer.channel = s.get("channel", cfg.scorer.channel)
        if s.get("source"):
            cfg.scorer.source = Path(s["source"])
        if s.get("coefficients"):
            try:
                doc = json.loads(s["coefficients"])
                cfg.scorer.weights = doc["weights"]
                cfg.scorer.bias = doc.get("bias")
            except (json.JSONDecodeError, KeyError, TypeError):
                raise SomnolineError("[scorer] coefficients must be JSON with weights/bias")
    if parser.has_section("worker"):
        s = parser["worker"]
        cfg.frontend_url = s.get("frontend_url", cfg.frontend_url)
        cfg.epoch_length_s = s.getfloat("epoch_length_s", cfg.epoch_length_s)
    return cfg
