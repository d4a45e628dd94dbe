"""Two-step segmentation (detect shots, classify each, merge) and corpus evaluation."""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
import torch

from .errors import MissingMedia, ShotClassificationError, ValidationError
from .features import (
    SAMPLE_RATE,
    SAMPLES_PER_VIDEO_FRAME,
    AudioMeta,
    SamplingSpec,
    audio_window_for_span,
    extract_window,
    mel_spectrogram,
    n_stft_frames,
    resize_bilinear,
    sample_frame_indices,
    to_float,
)
from .ingest import VideoRecord
from .models.inference import argmax_label_index, frame_vote, softmax
from .shotdetect import DetectorConfig, ShotList, detect_shots
from .timeline import (
    LABELS,
    NUM_LABELS,
    DurationConfusion,
    MetricsReport,
    Timeline,
    as_fps,
    confusion_durations,
    merge_adjacent,
    metrics,
    timeline_from_labels,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    sampling: SamplingSpec = field(default_factory=lambda: SamplingSpec(mode="clamp"))
    model_id: str = ""
    weights: str | None = None
    use_audio: bool = False
    samples_per_frame: int = SAMPLES_PER_VIDEO_FRAME
    workers: int = 1


@dataclass(frozen=True)
class ShotSample:
    """What a classifier sees for one shot."""

    index: int
    span: tuple[int, int]
    frame_indices: tuple[int, ...]
    frames: Sequence[np.ndarray]
    audio: np.ndarray | None
    fps: object


@dataclass
class RunResult:
    video_id: str
    predicted: Timeline
    shot_probs: list[np.ndarray]
    shots: ShotList
    wall_time_s: float


Classifier = Callable[[ShotSample], np.ndarray]


def _check_probs(p, index: int) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (NUM_LABELS,):
        raise ShotClassificationError(index, f"expected {NUM_LABELS} probabilities, got shape {p.shape}")
    if not np.all(np.isfinite(p)) or (p < 0).any() or abs(p.sum() - 1.0) > 1e-6:
        raise ShotClassificationError(index, f"not a probability vector: {p}")
    return p


def segment_video(
    frames,
    fps,
    classifier: Classifier,
    cfg: PipelineConfig | None = None,
    audio: np.ndarray | None = None,
    video_id: str = "",
    sample_rate: int = SAMPLE_RATE,
) -> RunResult:
    """Detect shots in ``frames``, classify each one, and merge same-label neighbours.

    ``frames`` must support ``len`` and integer indexing (it is read twice:
    once streamed for detection, once by index for sampling).
    """
    cfg = cfg or PipelineConfig()
    fps = as_fps(fps)
    if cfg.use_audio and audio is None:
        raise ValidationError("use_audio is set but no audio was supplied")
    t0 = time.perf_counter()
    shots = detect_shots((frames[i] for i in range(len(frames))), cfg.detector, fps)
    meta = AudioMeta(sample_rate, len(audio), fps) if audio is not None else None

    def classify(item):
        k, (a, b) = item
        try:
            idx = tuple(sample_frame_indices((a, b), cfg.sampling))
            pcm = None
            if meta is not None and cfg.use_audio:
                window = audio_window_for_span((a, b), cfg.sampling, meta, cfg.samples_per_frame)
                pcm = extract_window(audio, window)
            shot = ShotSample(k, (a, b), idx, [frames[i] for i in idx], pcm, fps)
            return _check_probs(classifier(shot), k)
        except ShotClassificationError:
            raise
        except Exception as exc:
            raise ShotClassificationError(k, exc) from exc

    items = list(enumerate(shots.spans))
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            probs = list(pool.map(classify, items))
    else:
        probs = [classify(it) for it in items]
    labels = [LABELS[argmax_label_index(p)] for p in probs]
    edges = [0, *shots.boundaries, shots.frame_count]
    predicted = merge_adjacent(timeline_from_labels(labels, edges, fps))
    return RunResult(video_id, predicted, probs, shots, time.perf_counter() - t0)


# -- model-backed classifier -------------------------------------------------


def spec_frames_for(num_frames: int, samples_per_frame: int = SAMPLES_PER_VIDEO_FRAME) -> int:
    return n_stft_frames(num_frames * samples_per_frame)


def clip_array(frames: Sequence[np.ndarray], size: int) -> np.ndarray:
    return np.stack([resize_bilinear(to_float(f), size) for f in frames])


def model_inputs(arch: str, frames, pcm, image_size: int) -> tuple[torch.Tensor, ...]:
    """Per-example input tensors for an architecture (no batch axis)."""
    if arch == "frame":
        return (torch.from_numpy(clip_array(frames, image_size)),)
    clip = torch.from_numpy(clip_array(frames, image_size)) if arch in ("vivit", "fusion") else None
    spec = None
    if arch in ("ast", "fusion"):
        if pcm is None:
            raise ValidationError(f"{arch} model needs audio")
        spec = torch.from_numpy(mel_spectrogram(pcm).values.astype(np.float32))
    if arch == "vivit":
        return (clip,)
    if arch == "ast":
        return (spec,)
    return (clip, spec)


class ModelClassifier:
    """Adapts a trained 5-way model to the per-shot classifier interface.

    Frame models score each sampled frame and average the softmax outputs;
    clip models see the whole sampled clip (and its audio window).
    """

    def __init__(self, model: torch.nn.Module):
        arch = getattr(model, "arch", None) or model.kind
        if arch.startswith("binary") or model.config.num_classes != NUM_LABELS:
            raise ValidationError("segmentation needs a 5-way classifier; evaluate binary models separately")
        self.model = model.eval()
        self.arch = arch
        self.image_size = model.config.image_size

    @property
    def needs_audio(self) -> bool:
        return self.arch in ("ast", "fusion")

    @property
    def frames_per_clip(self) -> int | None:
        return getattr(self.model.config, "num_frames", None)

    @torch.no_grad()
    def __call__(self, shot: ShotSample) -> np.ndarray:
        inputs = model_inputs(self.arch, shot.frames, shot.audio, self.image_size)
        if self.arch == "frame":
            logits = self.model(inputs[0]).double().numpy()
            return frame_vote(softmax(logits))
        logits = self.model(*(x.unsqueeze(0) for x in inputs))[0].double().numpy()
        return softmax(logits)


def pipeline_config_for(classifier, base: PipelineConfig | None = None) -> PipelineConfig:
    """Align sampling and audio flags with what a ModelClassifier consumes."""
    base = base or PipelineConfig()
    if not isinstance(classifier, ModelClassifier):
        return base
    n = classifier.frames_per_clip or base.sampling.frame_count
    sampling = replace(base.sampling, frame_count=n, mode="clamp")
    return replace(base, sampling=sampling, use_audio=classifier.needs_audio)


# -- evaluation ------------------------------------------------------------


@dataclass
class CorpusEvaluation:
    per_video: dict[str, tuple[DurationConfusion, MetricsReport]]
    pooled: DurationConfusion
    pooled_metrics: MetricsReport


def evaluate_corpus(records: Sequence[VideoRecord], predictions: Mapping[str, Timeline]) -> CorpusEvaluation:
    """Per-video and pooled duration confusion between annotations and predictions.

    Only frames labelled in both timelines are scored; the rest is reported
    as excluded duration.
    """
    if not records:
        raise ValidationError("cannot evaluate an empty corpus")
    per_video = {}
    pooled = None
    for rec in records:
        if rec.video_id not in predictions:
            raise MissingMedia(rec.video_id)
        cm = confusion_durations(predictions[rec.video_id], rec.annotation)
        per_video[rec.video_id] = (cm, metrics(cm))
        if pooled is None:
            pooled = cm
        elif pooled.fps == cm.fps:
            pooled = pooled + cm
        else:
            # mixed frame rates: pool in seconds by rescaling to a common rate
            pooled = _pool_mixed(pooled, cm)
    return CorpusEvaluation(per_video, pooled, metrics(pooled))


def _pool_mixed(a: DurationConfusion, b: DurationConfusion) -> DurationConfusion:
    """Pool confusions at different frame rates by rescaling both to a common
    rate at which every original frame is a whole number of frames."""
    from math import gcd, lcm

    fa, fb = a.fps, b.fps
    common = Fraction(lcm(fa.numerator, fb.numerator), gcd(fa.denominator, fb.denominator))
    ka, kb = int(common / fa), int(common / fb)
    return DurationConfusion(
        common,
        a.cells * ka + b.cells * kb,
        a.pred_only_frames * ka + b.pred_only_frames * kb,
        a.ref_only_frames * ka + b.ref_only_frames * kb,
    )


def _fmt(v) -> str:
    return "undefined" if not isinstance(v, float) else f"{v:.4f}"


def report_csv(report: MetricsReport, model: str) -> str:
    """Per-label precision/recall rows, then a summary section."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "label", "precision", "recall"])
    for label in LABELS:
        w.writerow([model, label.value, _fmt(report.precision[label]), _fmt(report.recall[label])])
    w.writerow(["model", "accuracy", "total_s", "excluded_s"])
    w.writerow([model, _fmt(report.accuracy), f"{report.total_s:.3f}", f"{report.excluded_s:.3f}"])
    return buf.getvalue()


def read_report_csv(text: str) -> dict:
    rows = list(csv.reader(io.StringIO(text)))
    per_label = {r[1]: (r[2], r[3]) for r in rows[1 : 1 + NUM_LABELS]}
    summary = dict(zip(rows[1 + NUM_LABELS], rows[2 + NUM_LABELS]))
    return {"labels": per_label, "summary": summary}


def load_predictions(pred_dir) -> dict[str, Timeline]:
    """Read ``<video_id>.json`` timelines from a directory."""
    out = {}
    for path in sorted(Path(pred_dir).glob("*.json")):
        out[path.stem] = Timeline.from_json(json.loads(path.read_text()))
    return out
