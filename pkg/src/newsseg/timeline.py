"""Labeled frame timelines and duration-weighted evaluation.

All bookkeeping is in integer frames; seconds only appear when a report is
rendered, via the timeline's frame rate.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import FpsMismatch, OverlapError, SchemaError, UnknownLabel, ValidationError


class SceneLabel(enum.Enum):
    ADVERTISEMENT = "Advertisement"
    STORY = "Story"
    STUDIO = "Studio"
    TRANSITION = "Transition"
    VISUALISATION = "Visualisation"

    @property
    def index(self) -> int:
        return _LABEL_INDEX[self]

    @classmethod
    def parse(cls, value: "str | SceneLabel") -> "SceneLabel":
        if isinstance(value, SceneLabel):
            return value
        try:
            return cls(value)
        except ValueError:
            raise UnknownLabel(value) from None

    @classmethod
    def from_index(cls, index: int) -> "SceneLabel":
        return LABELS[index]

    def __str__(self) -> str:
        return self.value


LABELS: tuple[SceneLabel, ...] = tuple(SceneLabel)
_LABEL_INDEX = {label: i for i, label in enumerate(LABELS)}
NUM_LABELS = len(LABELS)


class _Undefined:
    """Sentinel for a ratio with an empty denominator."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "undefined"

    __str__ = __repr__

    def __bool__(self) -> bool:
        return False

    def __reduce__(self):
        return (_Undefined, ())


UNDEFINED = _Undefined()


def as_fps(value) -> Fraction:
    """Coerce a frame rate to an exact positive rational.

    Floats are read through their shortest decimal repr, so ``29.97`` becomes
    ``2997/100`` rather than the binary expansion.
    """
    if isinstance(value, bool):
        raise ValidationError(f"invalid fps {value!r}")
    if isinstance(value, (Fraction, Rational, int)):
        fps = Fraction(value)
    elif isinstance(value, float):
        if not np.isfinite(value):
            raise ValidationError(f"invalid fps {value!r}")
        fps = Fraction(repr(value))
    elif isinstance(value, str):
        try:
            fps = Fraction(value)
        except (ValueError, ZeroDivisionError):
            raise ValidationError(f"invalid fps {value!r}") from None
    else:
        raise ValidationError(f"invalid fps {value!r}")
    if fps <= 0:
        raise ValidationError(f"fps must be positive, got {value!r}")
    return fps


def fps_to_json(fps: Fraction):
    """int, exact decimal float, or an ``"n/d"`` string for rates like 30000/1001."""
    if fps.denominator == 1:
        return int(fps)
    if Fraction(repr(float(fps))) == fps:
        return float(fps)
    return f"{fps.numerator}/{fps.denominator}"


@dataclass(frozen=True, order=True)
class FrameSpan:
    """Half-open frame interval ``[start_frame, end_frame)`` with a label."""

    start_frame: int
    end_frame: int
    label: SceneLabel = field(compare=False)

    def __post_init__(self):
        for name in ("start_frame", "end_frame"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise SchemaError(f"{name} must be an integer, got {v!r}")
            if v < 0:
                raise SchemaError(f"{name} must be non-negative, got {v}")
            object.__setattr__(self, name, int(v))
        if self.end_frame < self.start_frame:
            raise SchemaError(f"span ends before it starts: [{self.start_frame}, {self.end_frame})")
        object.__setattr__(self, "label", SceneLabel.parse(self.label))

    @property
    def length(self) -> int:
        return self.end_frame - self.start_frame

    def to_json(self) -> dict:
        return {"start_frame": self.start_frame, "end_frame": self.end_frame, "label": self.label.value}

    @classmethod
    def from_json(cls, obj: Mapping) -> "FrameSpan":
        try:
            return cls(obj["start_frame"], obj["end_frame"], obj["label"])
        except KeyError as exc:
            raise SchemaError(f"span missing field {exc.args[0]!r}") from None
        except TypeError:
            raise SchemaError(f"span must be an object, got {obj!r}") from None


@dataclass(frozen=True)
class Timeline:
    fps: Fraction
    spans: tuple[FrameSpan, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "fps", as_fps(self.fps))
        spans = tuple(self.spans)
        object.__setattr__(self, "spans", spans)
        for s in spans:
            if s.length <= 0:
                raise ValidationError(f"zero-length span in timeline: {s!r}")
        for a, b in zip(spans, spans[1:]):
            if b.start_frame < a.start_frame:
                raise ValidationError("timeline spans are not sorted")
            if a.end_frame > b.start_frame:
                raise OverlapError(a, b)

    def __len__(self) -> int:
        return len(self.spans)

    def __iter__(self):
        return iter(self.spans)

    @property
    def end_frame(self) -> int:
        return self.spans[-1].end_frame if self.spans else 0

    def label_frames(self) -> dict[SceneLabel, int]:
        totals = dict.fromkeys(LABELS, 0)
        for s in self.spans:
            totals[s.label] += s.length
        return totals

    def seconds(self, frames: int) -> float:
        return float(Fraction(frames) / self.fps)

    def label_at(self, frame: int) -> SceneLabel | None:
        for s in self.spans:
            if s.start_frame <= frame < s.end_frame:
                return s.label
        return None

    def to_json(self) -> dict:
        return {"fps": fps_to_json(self.fps), "spans": [s.to_json() for s in self.spans]}

    @classmethod
    def from_json(cls, obj: Mapping) -> "Timeline":
        if not isinstance(obj, Mapping) or "fps" not in obj or "spans" not in obj:
            raise SchemaError("timeline JSON needs 'fps' and 'spans'")
        spans = [FrameSpan.from_json(s) for s in obj["spans"]]
        return normalize_timeline(spans, obj["fps"])


def normalize_timeline(spans: Iterable[FrameSpan], fps) -> Timeline:
    """Sort spans, drop empty ones and reject any overlap."""
    fps = as_fps(fps)
    kept = sorted((s for s in spans if s.length > 0), key=lambda s: (s.start_frame, s.end_frame))
    for a, b in zip(kept, kept[1:]):
        if a.end_frame > b.start_frame:
            raise OverlapError(a, b)
    return Timeline(fps, tuple(kept))


def merge_adjacent(t: Timeline) -> Timeline:
    """Fuse consecutive spans that touch exactly and share a label.

    Spans separated by a gap are never fused, even with equal labels.
    """
    merged: list[FrameSpan] = []
    for s in t.spans:
        if merged and merged[-1].label is s.label and merged[-1].end_frame == s.start_frame:
            merged[-1] = FrameSpan(merged[-1].start_frame, s.end_frame, s.label)
        else:
            merged.append(s)
    return Timeline(t.fps, tuple(merged))


@dataclass(frozen=True)
class DurationConfusion:
    """Frame counts indexed ``[predicted, annotated]``.

    ``pred_only_frames`` and ``ref_only_frames`` count frames that only one
    timeline labels; they are excluded from ``cells``.
    """

    fps: Fraction
    cells: np.ndarray
    pred_only_frames: int = 0
    ref_only_frames: int = 0

    def __post_init__(self):
        arr = np.array(self.cells, dtype=np.int64)
        if arr.shape != (NUM_LABELS, NUM_LABELS):
            raise ValidationError(f"confusion cells must be {NUM_LABELS}x{NUM_LABELS}, got {arr.shape}")
        if (arr < 0).any():
            raise ValidationError("confusion cells must be non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "cells", arr)
        object.__setattr__(self, "fps", as_fps(self.fps))

    @property
    def total_frames(self) -> int:
        return int(self.cells.sum())

    @property
    def excluded_frames(self) -> int:
        return self.pred_only_frames + self.ref_only_frames

    def seconds(self) -> np.ndarray:
        return self.cells / float(self.fps)

    def transpose(self) -> "DurationConfusion":
        return DurationConfusion(self.fps, self.cells.T, self.ref_only_frames, self.pred_only_frames)

    def __add__(self, other: "DurationConfusion") -> "DurationConfusion":
        if self.fps != other.fps:
            raise FpsMismatch(f"cannot pool confusions at {self.fps} and {other.fps} fps")
        return DurationConfusion(
            self.fps,
            self.cells + other.cells,
            self.pred_only_frames + other.pred_only_frames,
            self.ref_only_frames + other.ref_only_frames,
        )

    def __eq__(self, other):
        if not isinstance(other, DurationConfusion):
            return NotImplemented
        return (
            self.fps == other.fps
            and np.array_equal(self.cells, other.cells)
            and self.pred_only_frames == other.pred_only_frames
            and self.ref_only_frames == other.ref_only_frames
        )

    __hash__ = None


def confusion_durations(pred: Timeline, ref: Timeline) -> DurationConfusion:
    """Sweep both timelines once and accumulate co-labeled frame counts."""
    if pred.fps != ref.fps:
        raise FpsMismatch(f"predicted timeline at {pred.fps} fps, reference at {ref.fps} fps")
    cells = np.zeros((NUM_LABELS, NUM_LABELS), dtype=np.int64)
    p_spans, r_spans = pred.spans, ref.spans
    i = j = 0
    overlap = 0
    while i < len(p_spans) and j < len(r_spans):
        p, r = p_spans[i], r_spans[j]
        lo = max(p.start_frame, r.start_frame)
        hi = min(p.end_frame, r.end_frame)
        if hi > lo:
            cells[p.label.index, r.label.index] += hi - lo
            overlap += hi - lo
        if p.end_frame <= r.end_frame:
            i += 1
        else:
            j += 1
    pred_total = sum(s.length for s in p_spans)
    ref_total = sum(s.length for s in r_spans)
    return DurationConfusion(pred.fps, cells, pred_total - overlap, ref_total - overlap)


@dataclass(frozen=True)
class MetricsReport:
    precision: dict
    recall: dict
    accuracy: "float | _Undefined"
    total_s: float
    excluded_s: float = 0.0

    def to_json(self) -> dict:
        def enc(v):
            return "undefined" if v is UNDEFINED else v

        return {
            "precision": {k.value: enc(v) for k, v in self.precision.items()},
            "recall": {k.value: enc(v) for k, v in self.recall.items()},
            "accuracy": enc(self.accuracy),
            "total_s": self.total_s,
            "excluded_s": self.excluded_s,
        }


def _ratio(num: int, den: int):
    return UNDEFINED if den == 0 else num / den


def metrics(cm: DurationConfusion) -> MetricsReport:
    cells = cm.cells
    rows = cells.sum(axis=1)
    cols = cells.sum(axis=0)
    diag = np.diag(cells)
    precision = {lab: _ratio(int(diag[i]), int(rows[i])) for i, lab in enumerate(LABELS)}
    recall = {lab: _ratio(int(diag[i]), int(cols[i])) for i, lab in enumerate(LABELS)}
    fps = float(cm.fps)
    return MetricsReport(
        precision=precision,
        recall=recall,
        accuracy=_ratio(int(diag.sum()), int(cells.sum())),
        total_s=cm.total_frames / fps,
        excluded_s=cm.excluded_frames / fps,
    )


def per_frame_labels(t: Timeline, n_frames: int) -> np.ndarray:
    """Dense label-index array of length ``n_frames``; -1 where unlabeled."""
    out = np.full(n_frames, -1, dtype=np.int8)
    for s in t.spans:
        out[s.start_frame : min(s.end_frame, n_frames)] = s.label.index
    return out


def timeline_from_labels(labels: Sequence[SceneLabel], bounds: Sequence[int], fps) -> Timeline:
    """Build a tiling timeline from shot boundaries ``bounds`` (len = labels + 1)."""
    if len(bounds) != len(labels) + 1:
        raise ValidationError("need one more boundary than labels")
    spans = [FrameSpan(a, b, lab) for a, b, lab in zip(bounds, bounds[1:], labels)]
    return Timeline(as_fps(fps), tuple(spans))
