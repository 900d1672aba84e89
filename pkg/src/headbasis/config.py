"""Training configuration and its flat ``key=value`` text form."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import DomainError, ParseError


@dataclass(frozen=True)
class TrainConfig:
    num_basis: int = 8  # S; 48 at full scale
    feature_dim: int = 32  # C; 512 at full scale
    clip_len: int = 5  # t
    window_k: int = 8
    kappa: float = 10.0
    epsilon: float = 1.0
    lambda_ldmk: float = 0.02
    lambda_rec: float = 1.0
    identity_dim: int = 8
    hidden: int = 64
    lr: float = 1e-4
    lr_decayed: float = 2e-5
    lr_decay_step: int = 5000
    momentum: float = 0.9
    batch_size: int = 32
    stage1_steps: int = 10000
    stage2_steps: int = 5000
    stage3_steps: int = 5000
    holdout_fraction: float = 0.2
    log_every: int = 100
    seed: int = 0

    def __post_init__(self):
        positive = ("num_basis", "feature_dim", "clip_len", "kappa", "identity_dim", "hidden",
                    "lr", "lr_decayed", "batch_size", "log_every")
        for name in positive:
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)}")
        nonneg = ("window_k", "epsilon", "lambda_ldmk", "lambda_rec", "lr_decay_step",
                  "stage1_steps", "stage2_steps", "stage3_steps")
        for name in nonneg:
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.num_basis < 2 or self.feature_dim < 2 or self.clip_len < 2:
            raise DomainError("num_basis, feature_dim and clip_len must be >= 2")
        if not 0 <= self.momentum < 1:
            raise DomainError("momentum must be in [0, 1)")
        if not 0 <= self.holdout_fraction < 1:
            raise DomainError("holdout_fraction must be in [0, 1)")

    def stage_steps(self, stage: int) -> int:
        return (self.stage1_steps, self.stage2_steps, self.stage3_steps)[stage - 1]

    def learning_rate(self, step: int) -> float:
        return self.lr if step < self.lr_decay_step else self.lr_decayed

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        return "".join(f"{f.name}={getattr(self, f.name)!r}\n" for f in fields(self))

    @classmethod
    def from_text(cls, text: str) -> "TrainConfig":
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"config line {lineno}: expected key=value, got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in types:
                raise ParseError(f"config line {lineno}: unknown key {key!r}")
            try:
                values[key] = int(value) if types[key] in (int, "int") else float(value)
            except ValueError as exc:
                raise ParseError(f"config line {lineno}: bad value for {key}: {value!r}") from exc
        try:
            return cls(**values)
        except DomainError as exc:
            raise ParseError(f"invalid config: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "TrainConfig":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")
