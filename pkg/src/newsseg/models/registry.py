"""Model construction by kind, one-vs-all wrappers, and config fingerprints."""

from __future__ import annotations

from dataclasses import replace

from torch import nn

from ..errors import ValidationError
from ..timeline import LABELS, SceneLabel
from .cnn import ResidualCNN
from .config import CnnConfig, TransformerConfig, fingerprint
from .transformer import AudioTransformer, FusionClassifier, VideoTransformer

ARCHITECTURES = {
    "frame": (ResidualCNN, CnnConfig),
    "vivit": (VideoTransformer, TransformerConfig),
    "ast": (AudioTransformer, TransformerConfig),
    "fusion": (FusionClassifier, TransformerConfig),
}

TARGET_INDEX = 0
REST_INDEX = 1


class OneVsAll(nn.Module):
    """A backbone with a two-way head: index 0 = target label, 1 = everything else."""

    def __init__(self, backbone: nn.Module, target: SceneLabel):
        super().__init__()
        self.backbone = backbone
        self.target = SceneLabel.parse(target)
        self.config = backbone.config
        self.kind = f"binary:{self.target.value}:{backbone.kind}"

    @property
    def arch(self) -> str:
        return self.backbone.kind

    def forward(self, *inputs):
        return self.backbone(*inputs)

    def relabel(self, label) -> int:
        return relabel(label, self.target)


def relabel(label, target) -> int:
    lab = SceneLabel.from_index(label) if isinstance(label, int) else SceneLabel.parse(label)
    return TARGET_INDEX if lab is SceneLabel.parse(target) else REST_INDEX


def build_model(arch: str, config=None) -> nn.Module:
    try:
        cls, cfg_cls = ARCHITECTURES[arch]
    except KeyError:
        raise ValidationError(f"unknown architecture {arch!r}; choose from {sorted(ARCHITECTURES)}") from None
    return cls(config if config is not None else cfg_cls())


def binary_wrap(arch: str, base_config, target) -> OneVsAll:
    """Same backbone as ``arch`` but with a {target, rest} head."""
    cfg = replace(base_config, num_classes=2)
    return OneVsAll(build_model(arch, cfg), target)


def binary_suite(arch: str, base_config) -> dict[SceneLabel, OneVsAll]:
    return {label: binary_wrap(arch, base_config, label) for label in LABELS}


def model_fingerprint(model: nn.Module) -> str:
    """Config fingerprint, or "" for ad-hoc modules without kind/config."""
    kind = getattr(model, "kind", None)
    cfg = getattr(model, "config", None)
    if kind is None or cfg is None:
        return ""
    return fingerprint(kind, cfg)


def model_from_store(store) -> nn.Module:
    """Rebuild an (untrained) model from a store's kind/config and load the tensors."""
    kind = store.kind
    if kind.startswith("binary:"):
        _, target, arch = kind.split(":", 2)
        cfg_cls = ARCHITECTURES[arch][1]
        cfg = cfg_cls.from_dict(store.config)
        model = OneVsAll(build_model(arch, cfg), SceneLabel.parse(target))
    else:
        if kind not in ARCHITECTURES:
            raise ValidationError(f"weight file has unknown model kind {kind!r}")
        cfg = ARCHITECTURES[kind][1].from_dict(store.config)
        model = build_model(kind, cfg)
    store.load_into(model)
    return model
