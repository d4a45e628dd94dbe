"""Synthetic colour-block videos, tones, and colour-keyed oracle classifiers.

Used by the test suite and by ``newsseg train --data synthetic`` for
desk-scale experiments.
"""

from __future__ import annotations

import colorsys
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .features import SAMPLE_RATE, SAMPLES_PER_VIDEO_FRAME
from .shotdetect import rgb_to_hsv
from .timeline import LABELS, NUM_LABELS, FrameSpan, SceneLabel, Timeline

# evenly spaced hues, one per label
LABEL_HUES = {label: i / NUM_LABELS for i, label in enumerate(LABELS)}
BRIGHT, DIM = 1.0, 0.45


def label_color(label: SceneLabel, value: float = BRIGHT) -> tuple[int, int, int]:
    r, g, b = colorsys.hsv_to_rgb(LABEL_HUES[SceneLabel.parse(label)], 1.0, value)
    return (round(255 * r), round(255 * g), round(255 * b))


def color_block_video(
    lengths: Sequence[int],
    colors: Sequence[tuple[int, int, int]],
    size: tuple[int, int] = (16, 16),
    noise: float = 0.0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Concatenate constant-colour blocks into an (N, H, W, 3) uint8 video."""
    h, w = size
    blocks = [np.broadcast_to(np.array(c, np.uint8), (n, h, w, 3)) for n, c in zip(lengths, colors)]
    video = np.concatenate(blocks) if blocks else np.zeros((0, h, w, 3), np.uint8)
    if noise > 0:
        rng = rng or np.random.default_rng(0)
        video = np.clip(video + rng.normal(0, noise, video.shape), 0, 255).astype(np.uint8)
    else:
        video = np.ascontiguousarray(video)
    return video


def labeled_block_video(labels: Sequence[SceneLabel], lengths: Sequence[int], size=(16, 16), fps=25):
    """Video whose shot ``k`` is coloured by ``labels[k]``; brightness alternates
    by shot parity so that neighbouring same-label shots still cut."""
    colors = [label_color(lab, BRIGHT if k % 2 == 0 else DIM) for k, lab in enumerate(labels)]
    video = color_block_video(lengths, colors, size)
    edges = np.concatenate([[0], np.cumsum(lengths)]).astype(int)
    truth = Timeline(fps, tuple(FrameSpan(int(a), int(b), lab) for a, b, lab in zip(edges, edges[1:], labels)))
    return video, truth, edges[1:-1].tolist()


def tone(freq: float, n_samples: int, sr: int = SAMPLE_RATE, amplitude: float = 0.5, phase: float = 0.0):
    t = np.arange(n_samples) / sr
    return amplitude * np.sin(2 * np.pi * freq * t + phase)


def nearest_label_by_hue(frame: np.ndarray) -> SceneLabel:
    h, s, _ = rgb_to_hsv(frame).reshape(3, -1).mean(axis=1)
    hue = h / 255.0
    dist = [min(abs(hue - LABEL_HUES[lab]), 1 - abs(hue - LABEL_HUES[lab])) for lab in LABELS]
    return LABELS[int(np.argmin(dist))]


class ColorOracle:
    """Classifies a shot by the hue of its middle sampled frame.

    With ``error_rate > 0`` each shot is mislabelled independently with that
    probability (uniformly among the other labels); the draw is keyed by the
    shot's start frame so results do not depend on scheduling.
    """

    def __init__(self, error_rate: float = 0.0, seed: int = 0):
        self.error_rate = error_rate
        self.seed = seed

    def __call__(self, shot) -> np.ndarray:
        label = nearest_label_by_hue(shot.frames[len(shot.frames) // 2])
        idx = label.index
        if self.error_rate > 0:
            rng = np.random.default_rng([self.seed, shot.span[0]])
            if rng.random() < self.error_rate:
                idx = (idx + int(rng.integers(1, NUM_LABELS))) % NUM_LABELS
        out = np.zeros(NUM_LABELS)
        out[idx] = 1.0
        return out


class ConstantClassifier:
    def __init__(self, label: SceneLabel):
        self.label = SceneLabel.parse(label)

    def __call__(self, shot) -> np.ndarray:
        out = np.zeros(NUM_LABELS)
        out[self.label.index] = 1.0
        return out


@dataclass(frozen=True)
class AVClip:
    frames: np.ndarray  # (T, S, S, 3) uint8
    pcm: np.ndarray  # (T * samples_per_frame,)
    label: int


CLASS_TONES_HZ = (330.0, 880.0, 2200.0, 4400.0, 7000.0)


def synthetic_av_clips(
    n_clips: int,
    n_classes: int = 3,
    num_frames: int = 4,
    image_size: int = 32,
    samples_per_frame: int = SAMPLES_PER_VIDEO_FRAME,
    seed: int = 0,
    audio_noise: float = 0.001,
) -> list[AVClip]:
    """Balanced clips where class ``c`` has a distinct colour and a distinct tone,
    both perturbed by noise, brightness and phase jitter.

    ``audio_noise`` is the standard deviation of additive white noise on the
    waveform (the tone amplitude lies in [0.2, 0.6]).
    """
    rng = np.random.default_rng(seed)
    clips = []
    n_samples = num_frames * samples_per_frame
    for i in range(n_clips):
        c = i % n_classes
        value = rng.uniform(0.55, 1.0)
        base = np.array(label_color(LABELS[c], value), np.float64)
        frames = base + rng.normal(0, 12.0, (num_frames, image_size, image_size, 3))
        frames = np.clip(frames, 0, 255).astype(np.uint8)
        pcm = tone(CLASS_TONES_HZ[c], n_samples, amplitude=rng.uniform(0.2, 0.6), phase=rng.uniform(0, 2 * np.pi))
        pcm = pcm + rng.normal(0, audio_noise, n_samples)
        clips.append(AVClip(frames, pcm, c))
    order = rng.permutation(n_clips)
    return [clips[k] for k in order]
