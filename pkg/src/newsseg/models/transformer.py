"""Transformer classifiers for video clips and mel spectrograms.

Inputs are channels-last to match the feature extractors:

* video clips: ``(B, T, H, W, 3)`` floats in [0, 1]
* spectrograms: ``(B, n_mels, n_frames)`` log-power values
"""

from __future__ import annotations

import math

import torch
from torch import nn
from torch.nn import functional as F

from ..errors import ShapeError
from .config import TransformerConfig


def trunc_normal_(t: torch.Tensor, std: float = 0.02) -> torch.Tensor:
    return nn.init.trunc_normal_(t, std=std, a=-2 * std, b=2 * std)


def init_weights(module: nn.Module) -> None:
    if isinstance(module, nn.Linear):
        trunc_normal_(module.weight)
        if module.bias is not None:
            nn.init.zeros_(module.bias)
    elif isinstance(module, nn.LayerNorm):
        nn.init.ones_(module.weight)
        nn.init.zeros_(module.bias)


class MultiHeadSelfAttention(nn.Module):
    def __init__(self, dim: int, heads: int, dropout: float = 0.0):
        super().__init__()
        if dim % heads:
            raise ShapeError(f"dim {dim} not divisible by {heads} heads")
        self.heads = heads
        self.head_dim = dim // heads
        self.qkv = nn.Linear(dim, 3 * dim)
        self.proj = nn.Linear(dim, dim)
        self.attn_drop = nn.Dropout(dropout)
        self.proj_drop = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, n, d = x.shape
        qkv = self.qkv(x).reshape(b, n, 3, self.heads, self.head_dim).permute(2, 0, 3, 1, 4)
        q, k, v = qkv[0], qkv[1], qkv[2]
        scores = (q @ k.transpose(-2, -1)) / math.sqrt(self.head_dim)
        attn = self.attn_drop(scores.softmax(dim=-1))
        out = (attn @ v).transpose(1, 2).reshape(b, n, d)
        return self.proj_drop(self.proj(out))


class MLP(nn.Module):
    def __init__(self, dim: int, hidden: int, dropout: float = 0.0):
        super().__init__()
        self.fc1 = nn.Linear(dim, hidden)
        self.fc2 = nn.Linear(hidden, dim)
        self.drop = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.drop(self.fc2(self.drop(F.gelu(self.fc1(x)))))


class Block(nn.Module):
    """Pre-norm encoder block: x + attn(ln(x)), then x + mlp(ln(x))."""

    def __init__(self, dim: int, heads: int, mlp_dim: int, dropout: float = 0.0):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim, eps=1e-6)
        self.attn = MultiHeadSelfAttention(dim, heads, dropout)
        self.norm2 = nn.LayerNorm(dim, eps=1e-6)
        self.mlp = MLP(dim, mlp_dim, dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.norm1(x))
        return x + self.mlp(self.norm2(x))


class Encoder(nn.Module):
    """Class token + learned positional embedding + blocks + final norm."""

    def __init__(self, cfg: TransformerConfig, num_tokens: int):
        super().__init__()
        self.num_tokens = num_tokens
        self.cls_token = nn.Parameter(torch.zeros(1, 1, cfg.hidden))
        self.pos_embed = nn.Parameter(torch.zeros(1, num_tokens, cfg.hidden))
        self.drop = nn.Dropout(cfg.dropout)
        self.blocks = nn.ModuleList(Block(cfg.hidden, cfg.heads, cfg.mlp_dim, cfg.dropout) for _ in range(cfg.layers))
        self.norm = nn.LayerNorm(cfg.hidden, eps=1e-6)
        trunc_normal_(self.cls_token)
        trunc_normal_(self.pos_embed)

    def tokens(self, patches: torch.Tensor) -> torch.Tensor:
        b, n, _ = patches.shape
        if n + 1 != self.num_tokens:
            raise ShapeError(f"got {n + 1} tokens, positional embedding holds {self.num_tokens}")
        x = torch.cat([self.cls_token.expand(b, -1, -1), patches], dim=1)
        return self.drop(x + self.pos_embed)

    def forward(self, patches: torch.Tensor) -> torch.Tensor:
        x = self.tokens(patches)
        for blk in self.blocks:
            x = blk(x)
        return self.norm(x)[:, 0]


class TubeletEmbedding(nn.Module):
    """Linear projection of non-overlapping (t, p, p) tubelets."""

    def __init__(self, t: int, patch: int, dim: int, channels: int = 3):
        super().__init__()
        self.t = t
        self.patch = patch
        self.proj = nn.Linear(t * patch * patch * channels, dim)

    def forward(self, clip: torch.Tensor) -> torch.Tensor:
        if clip.ndim != 5:
            raise ShapeError(f"expected (B, T, H, W, C) clip, got shape {tuple(clip.shape)}")
        b, T, H, W, C = clip.shape
        t, p = self.t, self.patch
        if T % t or H % p or W % p:
            raise ShapeError(f"clip {T}x{H}x{W} not divisible into {t}x{p}x{p} tubelets")
        x = clip.reshape(b, T // t, t, H // p, p, W // p, p, C)
        x = x.permute(0, 1, 3, 5, 2, 4, 6, 7).reshape(b, (T // t) * (H // p) * (W // p), t * p * p * C)
        return self.proj(x)


class SpectrogramPatchEmbedding(nn.Module):
    """Non-overlapping (p, p) patches over (mel, time); time is zero-padded to a multiple of p."""

    def __init__(self, patch: int, dim: int):
        super().__init__()
        self.patch = patch
        self.proj = nn.Linear(patch * patch, dim)

    def forward(self, spec: torch.Tensor) -> torch.Tensor:
        if spec.ndim != 3:
            raise ShapeError(f"expected (B, n_mels, n_frames) spectrogram, got shape {tuple(spec.shape)}")
        b, M, T = spec.shape
        p = self.patch
        if M % p:
            raise ShapeError(f"{M} mel bins not divisible by patch {p}")
        pad = (-T) % p
        if pad:
            spec = F.pad(spec, (0, pad))
        cols = (T + pad) // p
        x = spec.reshape(b, M // p, p, cols, p).permute(0, 1, 3, 2, 4).reshape(b, (M // p) * cols, p * p)
        return self.proj(x)


def standardize(spec: torch.Tensor, eps: float = 1e-5) -> torch.Tensor:
    """Zero-mean, unit-variance per spectrogram."""
    mean = spec.mean(dim=(1, 2), keepdim=True)
    std = spec.std(dim=(1, 2), keepdim=True, unbiased=False)
    return (spec - mean) / (std + eps)


class VideoTransformer(nn.Module):
    """Unfactorised spatio-temporal transformer over tubelet tokens."""

    kind = "vivit"

    def __init__(self, cfg: TransformerConfig):
        super().__init__()
        self.config = cfg
        self.embed = TubeletEmbedding(cfg.tubelet_t, cfg.patch, cfg.hidden)
        self.encoder = Encoder(cfg, cfg.video_tokens)
        self.head = nn.Linear(cfg.hidden, cfg.num_classes)
        self.apply(init_weights)

    def token_sequence(self, clip: torch.Tensor) -> torch.Tensor:
        return self.encoder.tokens(self.embed(clip))

    def features(self, clip: torch.Tensor) -> torch.Tensor:
        return self.encoder(self.embed(clip))

    def forward(self, clip: torch.Tensor) -> torch.Tensor:
        return self.head(self.features(clip))


class AudioTransformer(nn.Module):
    """Spectrogram transformer over non-overlapping 16x16 patches."""

    kind = "ast"

    def __init__(self, cfg: TransformerConfig):
        super().__init__()
        self.config = cfg
        self.embed = SpectrogramPatchEmbedding(cfg.patch, cfg.hidden)
        self.encoder = Encoder(cfg, cfg.audio_tokens)
        self.head = nn.Linear(cfg.hidden, cfg.num_classes)
        self.apply(init_weights)

    def _patches(self, spec: torch.Tensor) -> torch.Tensor:
        if spec.ndim == 3 and spec.shape[1] != self.config.n_mels:
            raise ShapeError(f"expected {self.config.n_mels} mel bins, got {spec.shape[1]}")
        return self.embed(standardize(spec))

    def token_sequence(self, spec: torch.Tensor) -> torch.Tensor:
        return self.encoder.tokens(self._patches(spec))

    def features(self, spec: torch.Tensor) -> torch.Tensor:
        return self.encoder(self._patches(spec))

    def forward(self, spec: torch.Tensor) -> torch.Tensor:
        return self.head(self.features(spec))


class FusionClassifier(nn.Module):
    """Concatenate the video and audio class-token features, then one linear layer."""

    kind = "fusion"

    def __init__(self, cfg: TransformerConfig):
        super().__init__()
        self.config = cfg
        self.video = VideoTransformer(cfg)
        self.audio = AudioTransformer(cfg)
        # the per-branch heads are unused here
        del self.video.head, self.audio.head
        self.video.head = nn.Identity()
        self.audio.head = nn.Identity()
        self.fusion = nn.Linear(self.fusion_input_width, cfg.num_classes)
        init_weights(self.fusion)

    @property
    def fusion_input_width(self) -> int:
        return 2 * self.config.hidden

    def fused_features(self, clip: torch.Tensor, spec: torch.Tensor) -> torch.Tensor:
        return torch.cat([self.video.features(clip), self.audio.features(spec)], dim=-1)

    def forward(self, clip: torch.Tensor, spec: torch.Tensor) -> torch.Tensor:
        return self.fusion(self.fused_features(clip, spec))
