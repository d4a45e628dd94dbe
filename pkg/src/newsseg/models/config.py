"""Configuration types and the named presets."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, fields, replace

from ..errors import ValidationError


@dataclass(frozen=True)
class TransformerConfig:
    layers: int = 6
    heads: int = 6
    hidden: int = 384
    mlp_dim: int | None = None
    patch: int = 16
    tubelet_t: int = 2
    dropout: float = 0.1
    num_classes: int = 5
    image_size: int = 224
    num_frames: int = 16
    n_mels: int = 128
    spec_frames: int = 51

    def __post_init__(self):
        if self.mlp_dim is None:
            object.__setattr__(self, "mlp_dim", 4 * self.hidden)
        if self.layers < 1:
            raise ValidationError("layers must be >= 1")
        if self.heads < 1 or self.hidden % self.heads:
            raise ValidationError(f"hidden={self.hidden} not divisible by heads={self.heads}")
        if self.image_size % self.patch or self.n_mels % self.patch:
            raise ValidationError("image_size and n_mels must be multiples of the patch size")
        if self.num_frames % self.tubelet_t:
            raise ValidationError("num_frames must be a multiple of tubelet_t")
        if not 0.0 <= self.dropout < 1.0:
            raise ValidationError("dropout must be in [0, 1)")

    @property
    def video_tokens(self) -> int:
        side = self.image_size // self.patch
        return 1 + (self.num_frames // self.tubelet_t) * side * side

    @property
    def audio_columns(self) -> int:
        return math.ceil(self.spec_frames / self.patch)

    @property
    def audio_tokens(self) -> int:
        return 1 + (self.n_mels // self.patch) * self.audio_columns

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TransformerConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown transformer config key(s): {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class CnnConfig:
    widths: tuple[int, ...] = (32, 64, 128, 256)
    blocks: tuple[int, ...] = (2, 2, 2, 2)
    num_classes: int = 5
    image_size: int = 224

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(self.widths))
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if len(self.widths) != len(self.blocks) or not self.widths:
            raise ValidationError("widths and blocks must be non-empty and equally long")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["widths"] = list(self.widths)
        d["blocks"] = list(self.blocks)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CnnConfig":
        return cls(**d)


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "adam"
    learning_rate: float = 1e-4
    batch_size: int = 32
    max_epochs: int = 100
    early_stop_patience: int | None = 15
    weight_decay: float | None = None
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weighted_sampling: bool = False
    restore_best: bool = True

    def __post_init__(self):
        if self.optimizer not in ("adam", "adamw"):
            raise ValidationError(f"optimizer must be adam or adamw, got {self.optimizer!r}")
        if self.learning_rate < 0:
            raise ValidationError("learning_rate must be non-negative")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise ValidationError("max_epochs must be >= 1")
        if self.early_stop_patience is not None and self.early_stop_patience < 1:
            raise ValidationError("early_stop_patience must be >= 1 or None")
        object.__setattr__(self, "betas", tuple(self.betas))

    @property
    def effective_weight_decay(self) -> float:
        if self.weight_decay is not None:
            return self.weight_decay
        return 0.01 if self.optimizer == "adamw" else 0.0

    def replace(self, **changes) -> "TrainConfig":
        return replace(self, **changes)


TRAIN_PRESETS: dict[str, TrainConfig] = {
    "image": TrainConfig("adam", 1e-4, 32, 100, 15, weighted_sampling=True),
    "vivit": TrainConfig("adamw", 5e-3, 16, 2000, 15),
    "ast": TrainConfig("adamw", 5e-3, 16, 2000, 15),
    "vivit-ast": TrainConfig("adamw", 5e-3, 16, 2000, 15),
    "vivit-ast-l": TrainConfig("adamw", 5e-3, 8, 2000, 15),
}

# CLI model id -> (architecture, preset, frames per clip)
MODEL_KINDS: dict[str, tuple[str, str, int]] = {
    "frame": ("frame", "image", 16),
    "vivit": ("vivit", "vivit", 16),
    "ast": ("ast", "ast", 16),
    "fusion": ("fusion", "vivit-ast", 16),
    "fusion-l": ("fusion", "vivit-ast-l", 32),
}


def train_preset(name: str) -> TrainConfig:
    """Look up a preset; ``binary:<label>`` resolves to the large fusion preset."""
    if name.startswith("binary:"):
        name = "vivit-ast-l"
    try:
        return TRAIN_PRESETS[name]
    except KeyError:
        raise ValidationError(f"unknown preset {name!r}; choose from {sorted(TRAIN_PRESETS)} or binary:<label>") from None


def fingerprint(kind: str, config) -> str:
    payload = json.dumps({"kind": kind, "config": config.to_dict()}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()[:16]
