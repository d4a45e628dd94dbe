"""Configurable-depth residual CNN used as the per-frame image classifier."""

from __future__ import annotations

import torch
from torch import nn
from torch.nn import functional as F

from ..errors import ShapeError
from .config import CnnConfig


def _norm(channels: int) -> nn.GroupNorm:
    return nn.GroupNorm(min(8, channels), channels)


class BasicBlock(nn.Module):
    def __init__(self, cin: int, cout: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(cin, cout, 3, stride, 1, bias=False)
        self.norm1 = _norm(cout)
        self.conv2 = nn.Conv2d(cout, cout, 3, 1, 1, bias=False)
        self.norm2 = _norm(cout)
        self.shortcut = None
        if stride != 1 or cin != cout:
            self.shortcut = nn.Sequential(nn.Conv2d(cin, cout, 1, stride, bias=False), _norm(cout))

    def forward(self, x):
        out = F.relu(self.norm1(self.conv1(x)))
        out = self.norm2(self.conv2(out))
        skip = x if self.shortcut is None else self.shortcut(x)
        return F.relu(out + skip)


class ResidualCNN(nn.Module):
    """Input ``(B, H, W, 3)`` in [0, 1]; output ``(B, num_classes)`` logits."""

    kind = "frame"

    def __init__(self, cfg: CnnConfig | None = None):
        super().__init__()
        cfg = cfg or CnnConfig()
        self.config = cfg
        w0 = cfg.widths[0]
        self.stem = nn.Sequential(nn.Conv2d(3, w0, 7, 2, 3, bias=False), _norm(w0), nn.ReLU(), nn.MaxPool2d(3, 2, 1))
        stages = []
        cin = w0
        for i, (width, n) in enumerate(zip(cfg.widths, cfg.blocks)):
            for j in range(n):
                stride = 2 if (j == 0 and i > 0) else 1
                stages.append(BasicBlock(cin, width, stride))
                cin = width
        self.stages = nn.Sequential(*stages)
        self.head = nn.Linear(cin, cfg.num_classes)
        for m in self.modules():
            if isinstance(m, nn.Conv2d):
                nn.init.kaiming_normal_(m.weight, mode="fan_out", nonlinearity="relu")
        nn.init.normal_(self.head.weight, std=0.01)
        nn.init.zeros_(self.head.bias)

    def features(self, image: torch.Tensor) -> torch.Tensor:
        if image.ndim != 4 or image.shape[-1] != 3:
            raise ShapeError(f"expected (B, H, W, 3) images, got shape {tuple(image.shape)}")
        x = image.permute(0, 3, 1, 2)
        x = self.stages(self.stem(x))
        return x.mean(dim=(2, 3))

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        return self.head(self.features(image))


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())
