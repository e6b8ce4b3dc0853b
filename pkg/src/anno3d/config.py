"""Reconstruction configuration with file round-trip and CLI overrides."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace


@dataclass(frozen=True)
class ReconstructionConfig:
    working_resolution: int = 320
    epsilon: float = 0.05
    eta: float = 0.01
    lp_mode: str = "strict"  # strict | soft
    pair_stride: int = 5
    pair_offset: int = 2
    integration_tolerance: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if self.working_resolution <= 0:
            raise ValueError("working_resolution must be positive")
        if self.epsilon <= 0 or self.eta <= 0:
            raise ValueError("epsilon and eta must be positive")
        if self.lp_mode not in ("strict", "soft"):
            raise ValueError(f"lp_mode must be strict or soft, got {self.lp_mode!r}")
        if self.pair_stride <= 0 or self.pair_offset <= 0:
            raise ValueError("pair_stride and pair_offset must be positive")
        if self.integration_tolerance <= 0:
            raise ValueError("integration_tolerance must be positive")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ReconstructionConfig":
        unknown = set(data) - set(cls().to_dict())
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def with_overrides(self, **kwargs) -> "ReconstructionConfig":
        kwargs = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **kwargs) if kwargs else self

    @classmethod
    def load(cls, path) -> "ReconstructionConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
