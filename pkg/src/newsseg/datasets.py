"""Training examples from annotated corpora or synthetic clips."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Sequence

import numpy as np

from .features import (
    AudioMeta,
    AugmentationConfig,
    SamplingSpec,
    audio_window_for_span,
    augment_clip,
    augment_images,
    extract_window,
    read_wav,
    sample_frame_indices,
)
from .errors import MissingMedia, SpanTooShort
from .ingest import VideoRecord, clip_records, split_corpus
from .models.registry import relabel
from .pipeline import model_inputs
from .shotdetect import RawVideo
from .synthetic import synthetic_av_clips

log = logging.getLogger(__name__)


def synthetic_examples(
    arch: str,
    n_clips: int = 60,
    n_classes: int = 3,
    num_frames: int = 4,
    image_size: int = 32,
    samples_per_frame: int = 1728,
    seed: int = 0,
    val_fraction: float = 0.25,
    audio_noise: float = 0.001,
):
    """(train, held-out) example lists built from :func:`synthetic_av_clips`."""
    clips = synthetic_av_clips(n_clips, n_classes, num_frames, image_size, samples_per_frame, seed, audio_noise)
    examples = []
    for c in clips:
        inputs = model_inputs(arch, c.frames, c.pcm, image_size)
        if arch == "frame":
            examples.extend(((img,), c.label) for img in inputs[0])
        else:
            examples.append((inputs, c.label))
    n_val = int(round(len(examples) * val_fraction))
    return examples[n_val:], examples[:n_val]


def relabel_examples(examples: Sequence, target) -> list:
    return [(inputs, relabel(int(y), target)) for inputs, y in examples]


def corpus_examples(
    arch: str,
    records: Sequence[VideoRecord],
    media_dir,
    num_frames: int = 16,
    image_size: int = 224,
    samples_per_frame: int = 1728,
    seed: int = 0,
    ratios=(0.8, 0.1, 0.1),
    augmentation: AugmentationConfig | None = None,
):
    """Build (train, val) examples from annotated videos on disk.

    Media are ``<media_dir>/<video_id>.rgb`` (raw RGB24 at the record's
    width x height) and, for audio models, ``<video_id>.wav``. Spans shorter
    than the sampling minimum are skipped. Training clips are augmented.
    """
    media_dir = Path(media_dir)
    spec = SamplingSpec(frame_count=num_frames)
    aug = augmentation or AugmentationConfig(output_size=image_size, seed=seed)
    rng = np.random.default_rng(seed)
    assignment = split_corpus(records, ratios, seed)
    needs_audio = arch in ("ast", "fusion")
    by_id = {r.video_id: r for r in records}
    train, val = [], []
    skipped = 0
    videos: dict[str, tuple] = {}
    for clip in clip_records(records, assignment):
        if clip.split_tag == "test":
            continue
        rec = by_id[clip.video_id]
        if clip.video_id not in videos:
            rgb = media_dir / f"{clip.video_id}.rgb"
            if not rgb.exists():
                raise MissingMedia(clip.video_id)
            pcm = read_wav(media_dir / f"{clip.video_id}.wav")[0] if needs_audio else None
            videos = {clip.video_id: (RawVideo(rgb, rec.width, rec.height), pcm)}
        frames_src, pcm = videos[clip.video_id]
        try:
            idx = sample_frame_indices(clip.span, spec)
        except SpanTooShort:
            skipped += 1
            continue
        frames = [frames_src[i] for i in idx]
        window_pcm = None
        if needs_audio:
            window = audio_window_for_span(clip.span, spec, AudioMeta(rec.audio_sample_rate, len(pcm), rec.fps), samples_per_frame)
            window_pcm = extract_window(pcm, window)
        is_train = clip.split_tag == "train"
        if is_train:
            frames = _augmented(arch, frames, aug, rng)
        inputs = model_inputs(arch, frames, window_pcm, image_size)
        target = train if is_train else val
        label = clip.span.label.index
        if arch == "frame":
            target.extend(((img,), label) for img in inputs[0])
        else:
            target.append((inputs, label))
    if skipped:
        log.info("skipped %d clip(s) shorter than %d frames", skipped, spec.min_span_frames)
    return train, val


def _augmented(arch: str, frames, aug: AugmentationConfig, rng):
    # augmented frames come back as floats in [0, 1] at the output size
    if arch == "frame":
        return list(augment_images(frames, aug, rng))
    return list(augment_clip(frames, aug, rng))
