"""Annotation ingest, corpus statistics, splits and class-balancing weights."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InsufficientVideos, SchemaError, ValidationError
from .timeline import (
    LABELS,
    FrameSpan,
    SceneLabel,
    Timeline,
    as_fps,
    fps_to_json,
    normalize_timeline,
)

log = logging.getLogger(__name__)

SPLIT_TAGS = ("train", "val", "test")

_VIDEO_FIELDS = ("video_id", "fps", "frame_count", "width", "height", "audio_sample_rate", "regions")


@dataclass(frozen=True)
class VideoRecord:
    video_id: str
    fps: Fraction
    frame_count: int
    width: int
    height: int
    audio_sample_rate: int
    annotation: Timeline

    def __post_init__(self):
        object.__setattr__(self, "fps", as_fps(self.fps))
        for name in ("frame_count", "width", "height", "audio_sample_rate"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v <= 0:
                raise SchemaError(f"{self.video_id}: {name} must be a positive integer, got {v!r}")
        if self.annotation.fps != self.fps:
            raise SchemaError(f"{self.video_id}: annotation fps differs from video fps")
        if self.annotation.end_frame > self.frame_count:
            raise SchemaError(
                f"{self.video_id}: annotation reaches frame {self.annotation.end_frame} "
                f"beyond frame_count {self.frame_count}"
            )

    def to_json(self) -> dict:
        return {
            "video_id": self.video_id,
            "fps": fps_to_json(self.fps),
            "frame_count": self.frame_count,
            "width": self.width,
            "height": self.height,
            "audio_sample_rate": self.audio_sample_rate,
            "regions": [s.to_json() for s in self.annotation.spans],
        }


@dataclass(frozen=True)
class ClipRecord:
    video_id: str
    span: FrameSpan
    split_tag: str


def _parse_video(obj) -> VideoRecord:
    if not isinstance(obj, Mapping):
        raise SchemaError(f"video entry must be an object, got {type(obj).__name__}")
    missing = [f for f in _VIDEO_FIELDS if f not in obj]
    if missing:
        raise SchemaError(f"video {obj.get('video_id', '?')!r} missing field(s): {', '.join(missing)}")
    video_id = obj["video_id"]
    if not isinstance(video_id, str) or not video_id:
        raise SchemaError(f"video_id must be a non-empty string, got {video_id!r}")
    if not isinstance(obj["regions"], list):
        raise SchemaError(f"{video_id}: regions must be a list")
    spans = [FrameSpan.from_json(r) for r in obj["regions"]]
    fps = as_fps(obj["fps"])
    return VideoRecord(
        video_id=video_id,
        fps=fps,
        frame_count=obj["frame_count"],
        width=obj["width"],
        height=obj["height"],
        audio_sample_rate=obj["audio_sample_rate"],
        annotation=normalize_timeline(spans, fps),
    )


def parse_annotations(document) -> list[VideoRecord]:
    """Parse an annotation document (already-decoded JSON, a JSON string, or a path)."""
    if isinstance(document, (str, Path)) and not str(document).lstrip().startswith("{"):
        document = json.loads(Path(document).read_text())
    elif isinstance(document, (str, bytes)):
        document = json.loads(document)
    if not isinstance(document, Mapping) or not isinstance(document.get("videos"), list):
        raise SchemaError("annotation document needs a top-level 'videos' list")
    records = [_parse_video(v) for v in document["videos"]]
    seen = set()
    for r in records:
        if r.video_id in seen:
            raise SchemaError(f"duplicate video_id {r.video_id!r}")
        seen.add(r.video_id)
    return records


def serialize_annotations(records: Iterable[VideoRecord]) -> dict:
    return {"videos": [r.to_json() for r in records]}


def load_annotations(path) -> list[VideoRecord]:
    with open(path) as fh:
        return parse_annotations(json.load(fh))


@dataclass(frozen=True)
class LabelStats:
    clip_count: int
    mean_duration_s: float
    total_duration_h: float


@dataclass(frozen=True)
class ClassDistribution:
    stats: dict  # SceneLabel -> LabelStats

    def __getitem__(self, label) -> LabelStats:
        return self.stats[SceneLabel.parse(label)]

    @property
    def total_clips(self) -> int:
        return sum(s.clip_count for s in self.stats.values())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["label", "clips", "avg_dur_s", "total_dur_h"])
        for label in LABELS:
            s = self.stats[label]
            w.writerow([label.value, s.clip_count, f"{s.mean_duration_s:.2f}", f"{s.total_duration_h:.2f}"])
        return buf.getvalue()


def class_distribution(records: Iterable[VideoRecord]) -> ClassDistribution:
    counts = dict.fromkeys(LABELS, 0)
    seconds = dict.fromkeys(LABELS, Fraction(0))
    for rec in records:
        for span in rec.annotation.spans:
            counts[span.label] += 1
            seconds[span.label] += Fraction(span.length) / rec.fps
    stats = {}
    for label in LABELS:
        n = counts[label]
        total = seconds[label]
        stats[label] = LabelStats(
            clip_count=n,
            mean_duration_s=float(total / n) if n else 0.0,
            total_duration_h=float(total / 3600),
        )
    return ClassDistribution(stats)


def _largest_remainder(n: int, ratios: Sequence[float]) -> list[int]:
    quotas = [n * r for r in ratios]
    sizes = [math.floor(q) for q in quotas]
    leftover = n - sum(sizes)
    # ties on the fractional part go to the earlier bucket
    order = sorted(range(len(ratios)), key=lambda i: (-(quotas[i] - sizes[i]), i))
    for i in order[:leftover]:
        sizes[i] += 1
    return sizes


def split_sizes(n_videos: int, ratios: Sequence[float]) -> list[int]:
    ratios = list(ratios)
    if len(ratios) != len(SPLIT_TAGS):
        raise ValidationError(f"need {len(SPLIT_TAGS)} ratios, got {len(ratios)}")
    if any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValidationError(f"ratios must be non-negative and sum to 1, got {ratios}")
    nonzero = [i for i, r in enumerate(ratios) if r > 0]
    if n_videos < len(nonzero):
        raise InsufficientVideos(f"{n_videos} video(s) cannot fill {len(nonzero)} non-empty split(s)")
    sizes = _largest_remainder(n_videos, ratios)
    # every bucket with a positive ratio must receive at least one video
    for i in nonzero:
        if sizes[i] == 0:
            donor = max(range(len(sizes)), key=lambda k: (sizes[k], -k))
            sizes[donor] -= 1
            sizes[i] += 1
    return sizes


def split_corpus(records: Sequence[VideoRecord], ratios=(0.8, 0.1, 0.1), seed: int = 0) -> dict[str, str]:
    """Assign each whole video to train/val/test.

    Returns a mapping ``video_id -> split tag``. The assignment depends only
    on the set of video ids, the ratios and the seed.
    """
    ids = sorted(r.video_id for r in records)
    sizes = split_sizes(len(ids), ratios)
    order = np.random.default_rng(seed).permutation(len(ids))
    assignment = {}
    pos = 0
    for tag, size in zip(SPLIT_TAGS, sizes):
        for k in order[pos : pos + size]:
            assignment[ids[k]] = tag
        pos += size
    return assignment


def clip_records(records: Iterable[VideoRecord], assignment: Mapping[str, str]) -> list[ClipRecord]:
    return [
        ClipRecord(rec.video_id, span, assignment[rec.video_id])
        for rec in records
        for span in rec.annotation.spans
    ]


def sample_weights(distribution: ClassDistribution) -> dict[SceneLabel, float]:
    """Inverse-frequency weights with unit mean over clips.

    Labels with no clips are dropped (with a warning); the remaining weights
    make each present label equally likely under weighted sampling.
    """
    present = {lab: s.clip_count for lab, s in distribution.stats.items() if s.clip_count > 0}
    absent = [lab.value for lab in LABELS if lab not in present]
    if absent:
        warnings.warn(f"no clips for label(s) {', '.join(absent)}; excluded from weighting", stacklevel=2)
    total = sum(present.values())
    k = len(present)
    return {lab: total / (k * n) for lab, n in present.items()}


def clip_weights(clips: Sequence, weights: Mapping[SceneLabel, float]) -> np.ndarray:
    """Per-clip sampling weights; ``clips`` may be ClipRecords, FrameSpans or labels."""
    out = np.empty(len(clips), dtype=np.float64)
    for i, c in enumerate(clips):
        label = getattr(getattr(c, "span", c), "label", c)
        out[i] = weights[SceneLabel.parse(label)]
    return out
