"""Run configuration loaded from a YAML file; every field has a default."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

import yaml

from adscout.backends import DEFAULT_TOKEN_ENV
from adscout.dynamic_prober import DEFAULT_DELTA
from adscout.memory import DEFAULT_TAU
from adscout.navigator import DEFAULT_K_BASE, EpisodeLimits
from adscout.static_profiler import SdkSignatureConfig, default_config
from adscout.utg import DEFAULT_ALPHA


@dataclass
class RemoteConfig:
    url: str = ""
    model: str = ""
    temperature: float = 0.0
    token_env: str = DEFAULT_TOKEN_ENV
    timeout: float = 60.0


@dataclass
class AdscoutConfig:
    alpha: float = DEFAULT_ALPHA
    tau: float = DEFAULT_TAU
    k_base: int = DEFAULT_K_BASE
    lam: float = 0.1
    delta_seconds: float = DEFAULT_DELTA
    probe_budget: int = 50
    max_steps: int = 60
    max_seconds: float = 300.0
    event_interval_seconds: float = 5.0
    max_ads: int | None = None
    wall_clock: bool = False
    signatures: str | None = None
    remote: RemoteConfig = field(default_factory=RemoteConfig)

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.k_base < 1:
            raise ValueError("k_base must be >= 1")

    @property
    def limits(self) -> EpisodeLimits:
        return EpisodeLimits(self.max_steps, self.max_seconds, self.event_interval_seconds, self.max_ads,
                             self.wall_clock)

    def sdk_config(self) -> SdkSignatureConfig:
        return SdkSignatureConfig.load(self.signatures) if self.signatures else default_config()

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "AdscoutConfig":
        known = {f.name for f in fields(cls)}
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown config keys {sorted(extra)}")
        kwargs = dict(doc)
        if "remote" in kwargs:
            kwargs["remote"] = RemoteConfig(**kwargs["remote"])
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path | None) -> "AdscoutConfig":
        if path is None:
            return cls()
        doc = yaml.safe_load(Path(path).read_text()) or {}
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return asdict(self)
