"""Run configuration: flat key = value text files with typed validation.

Environment variables override file values using the documented prefix, e.g.
``INFODISTILL_SEED=7`` overrides the ``seed`` key. The validated config has
a canonical rendering whose digest is recorded in the store manifest, so a
run is reproducible from (config digest, seed).
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

ENV_PREFIX = "INFODISTILL_"


class ConfigError(ValueError):
    """Invalid or missing configuration."""


@dataclass
class RunConfig:
    seed: int = 0
    store: str = "run"
    workers: int = 1
    corpus: str = ""
    backend: str = ""  # reference:<artifact path> | remote:<url>
    ngram_order: int = 4
    smoothing_k: float = 0.1
    condition_weight: float = 0.5
    cities: str = "bundled"
    media: str = "bundled"
    n_candidates: int = 1000
    iteration_rounds: int = 1
    trainer_mode: str = "update"
    trainer_weight: int = 1
    alpha: float = 1.0
    top_p: float = 0.9
    temperature: float = 1.0
    max_doc_tokens: int = 1024
    summary_sentences: int = 0  # 0 draws uniformly from 1..5 per candidate
    tau_s_log: float = math.log(14.0)
    tau_f_log: float = math.log(1.7)
    tau_b: float = 0.2
    mask_fraction: float = 0.25
    mask_policy: str = "tfidf"
    len_tau1: float = 38.0
    len_tau2: float = 69.0
    ext_tau1: float = 0.34
    ext_tau2: float = 0.51
    spe_tau2: float = 4.8
    keyword_count: int = 2
    export_mode: str = "plain"
    target_per_bucket: int = 0
    msttr_window: int = 100
    remote_top_k: int = 0
    remote_auth_token: str = ""

    def validate(self) -> None:
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.n_candidates < 1:
            raise ConfigError("n_candidates must be >= 1")
        if self.iteration_rounds < 0:
            raise ConfigError("iteration_rounds must be >= 0")
        if self.trainer_mode not in ("update", "replace"):
            raise ConfigError(f"unknown trainer_mode {self.trainer_mode!r}")
        if self.trainer_weight < 1:
            raise ConfigError("trainer_weight must be >= 1")
        if not self.backend:
            raise ConfigError("backend is required (reference:<path> or remote:<url>)")
        kind = self.backend.split(":", 1)[0]
        if kind not in ("reference", "remote"):
            raise ConfigError(f"backend must start with reference: or remote:, got {self.backend!r}")
        if kind == "reference" and not self.corpus:
            raise ConfigError("corpus path is required with a reference backend")
        if self.alpha < 0:
            raise ConfigError("alpha must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ConfigError("top_p must be in (0, 1]")
        if self.temperature <= 0:
            raise ConfigError("temperature must be > 0")
        if self.max_doc_tokens < 1:
            raise ConfigError("max_doc_tokens must be >= 1")
        if self.summary_sentences not in (0, 1, 2, 3, 4, 5):
            raise ConfigError("summary_sentences must be 0 (uniform) or 1..5")
        if not 0 < self.tau_b <= 1:
            raise ConfigError("tau_b must be in (0, 1]")
        if not 0 < self.mask_fraction < 1:
            raise ConfigError("mask_fraction must be in (0, 1)")
        if self.mask_policy not in ("tfidf", "random"):
            raise ConfigError(f"unknown mask_policy {self.mask_policy!r}")
        if self.keyword_count not in (1, 2):
            raise ConfigError("keyword_count must be 1 or 2")
        if self.export_mode not in ("plain", "controlled"):
            raise ConfigError(f"unknown export_mode {self.export_mode!r}")
        if self.ngram_order < 1:
            raise ConfigError("ngram_order must be >= 1")
        if self.smoothing_k <= 0:
            raise ConfigError("smoothing_k must be > 0")
        if not 0 <= self.condition_weight < 1:
            raise ConfigError("condition_weight must be in [0, 1)")
        if self.len_tau1 >= self.len_tau2 or self.ext_tau1 >= self.ext_tau2:
            raise ConfigError("bucket thresholds must satisfy tau1 < tau2")
        if self.msttr_window < 1:
            raise ConfigError("msttr_window must be >= 1")

    def canonical(self) -> str:
        lines = [f"{f.name} = {getattr(self, f.name)}" for f in sorted(fields(self), key=lambda f: f.name)]
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    declared = _FIELD_TYPES[key]
    if declared == "int":
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}") from exc
    if declared == "float":
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected a number, got {raw!r}") from exc
    return raw


def parse_config_text(text: str) -> dict:
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw)
    return values


def load_config(path: str | os.PathLike, overrides: dict | None = None) -> RunConfig:
    """Parse, apply env overrides and CLI overrides, validate."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    values = parse_config_text(p.read_text(encoding="utf-8"))
    for key in _FIELD_TYPES:
        env = os.environ.get(ENV_PREFIX + key.upper())
        if env is not None:
            values[key] = _coerce(key, env)
    if overrides:
        for key, val in overrides.items():
            if val is not None:
                values[key] = val
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg
