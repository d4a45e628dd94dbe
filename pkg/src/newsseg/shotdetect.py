"""Content-based hard-cut detection.

A cut is declared at frame ``i`` when the mean absolute HSV difference
between frames ``i-1`` and ``i`` exceeds a threshold and the current shot
already has at least ``min_shot_frames`` frames. Only one frame of look-back
is kept, so memory does not grow with video length.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator

import numpy as np

from .errors import DimensionMismatch, EmptyFrame, SchemaError, ValidationError
from .timeline import as_fps, fps_to_json


@dataclass(frozen=True)
class DetectorConfig:
    threshold: float = 27.0
    min_shot_frames: int = 15

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValidationError(f"threshold must be positive, got {self.threshold}")
        if self.min_shot_frames < 1:
            raise ValidationError(f"min_shot_frames must be >= 1, got {self.min_shot_frames}")


@dataclass(frozen=True)
class FrameStats:
    mean_h: float
    mean_s: float
    mean_v: float


@dataclass(frozen=True)
class ShotList:
    fps: Fraction
    boundaries: tuple[int, ...]
    frame_count: int

    def __post_init__(self):
        object.__setattr__(self, "fps", as_fps(self.fps))
        object.__setattr__(self, "boundaries", tuple(int(b) for b in self.boundaries))
        prev = 0
        for b in self.boundaries:
            if not prev < b < self.frame_count:
                raise ValidationError(f"boundary {b} out of order or outside (0, {self.frame_count})")
            prev = b

    @property
    def spans(self) -> list[tuple[int, int]]:
        edges = (0, *self.boundaries, self.frame_count)
        return list(zip(edges, edges[1:]))

    def __len__(self) -> int:
        return len(self.boundaries) + 1

    def to_json(self) -> dict:
        return {"fps": fps_to_json(self.fps), "boundaries": list(self.boundaries), "frame_count": self.frame_count}

    @classmethod
    def from_json(cls, obj) -> "ShotList":
        try:
            return cls(obj["fps"], obj["boundaries"], obj["frame_count"])
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"bad ShotList JSON: {exc}") from None


def rgb_to_hsv(frame: np.ndarray) -> np.ndarray:
    """Convert an 8-bit RGB raster (H, W, 3) to float HSV planes (3, H, W).

    All three channels are on a 0..255 scale; hue is 255 * degrees / 360 and
    is 0 for achromatic pixels.
    """
    frame = np.asarray(frame)
    if frame.ndim != 3 or frame.shape[2] != 3:
        raise DimensionMismatch(f"expected (H, W, 3) RGB raster, got shape {frame.shape}")
    if frame.shape[0] * frame.shape[1] == 0:
        raise EmptyFrame("frame has no pixels")
    return np.ascontiguousarray(np.moveaxis(_hsv(frame), -1, 0))


def _hsv(rgb: np.ndarray) -> np.ndarray:
    # any leading shape, channels last in and out
    rgb = rgb.astype(np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=-1)
    c = v - rgb.min(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(v > 0, 255.0 * c / v, 0.0)
        rc = np.where(c > 0, (v - r) / c, 0.0)
        gc = np.where(c > 0, (v - g) / c, 0.0)
        bc = np.where(c > 0, (v - b) / c, 0.0)
    h = np.where(r == v, bc - gc, np.where(g == v, 2.0 + rc - bc, 4.0 + gc - rc))
    h = np.where(c > 0, (h / 6.0) % 1.0, 0.0) * 255.0
    return np.stack([h, s, v], axis=-1)


def frame_stats(frame: np.ndarray) -> FrameStats:
    hsv = rgb_to_hsv(frame)
    h, s, v = hsv.reshape(3, -1).mean(axis=1)
    return FrameStats(float(h), float(s), float(v))


def _hsv_score(prev_hsv: np.ndarray, cur_hsv: np.ndarray) -> float:
    if prev_hsv.shape != cur_hsv.shape:
        raise DimensionMismatch(f"frame shapes differ: {prev_hsv.shape[1:]} vs {cur_hsv.shape[1:]}")
    return float(_plane_means(np.abs(cur_hsv - prev_hsv).reshape(1, 3, -1))[0])


def _plane_means(diff: np.ndarray) -> np.ndarray:
    # (k, 3, H*W) -> (k,); shared by both detector paths so scores agree bitwise
    return diff.mean(axis=2).mean(axis=1)


def content_score(prev: np.ndarray, cur: np.ndarray) -> float:
    """Average over H, S, V of the mean per-pixel absolute difference."""
    prev = np.asarray(prev)
    cur = np.asarray(cur)
    if prev.shape != cur.shape:
        raise DimensionMismatch(f"frame shapes differ: {prev.shape} vs {cur.shape}")
    return _hsv_score(rgb_to_hsv(prev), rgb_to_hsv(cur))


class ContentDetector:
    """Streaming detector: feed frames in order, then call :meth:`finish`."""

    def __init__(self, config: DetectorConfig | None = None):
        self.config = config or DetectorConfig()
        self._prev = None
        self._n = 0
        self._shot_start = 0
        self.boundaries: list[int] = []
        self.scores: list[float] = []

    def push(self, frame: np.ndarray) -> bool:
        """Consume one frame; returns True if a cut was declared at it."""
        hsv = rgb_to_hsv(frame)
        cut = False
        if self._prev is not None:
            score = _hsv_score(self._prev, hsv)
            self.scores.append(score)
            if score > self.config.threshold and self._n - self._shot_start >= self.config.min_shot_frames:
                self.boundaries.append(self._n)
                self._shot_start = self._n
                cut = True
        self._prev = hsv
        self._n += 1
        return cut

    @property
    def frames_seen(self) -> int:
        return self._n

    def finish(self, fps) -> ShotList:
        if self._n == 0:
            raise EmptyFrame("no frames were supplied")
        return ShotList(fps, tuple(self.boundaries), self._n)


def detect_shots(frames: Iterable[np.ndarray], config: DetectorConfig | None = None, fps=25) -> ShotList:
    if isinstance(frames, np.ndarray) and frames.ndim == 4:
        return _detect_array(frames, config or DetectorConfig(), fps)
    det = ContentDetector(config)
    for frame in frames:
        det.push(frame)
    return det.finish(fps)


_CHUNK_PIXELS = 1 << 20


def _array_scores(video: np.ndarray) -> np.ndarray:
    n, h, w = video.shape[:3]
    step = max(1, _CHUNK_PIXELS // (h * w))
    scores = np.empty(n - 1)
    prev = None
    for lo in range(0, n, step):
        planes = np.ascontiguousarray(np.moveaxis(_hsv(video[lo : lo + step]), -1, 1)).reshape(-1, 3, h * w)
        if prev is not None:
            planes = np.concatenate([prev, planes])
        d = _plane_means(np.abs(np.diff(planes, axis=0)))
        at = lo - 1 if prev is not None else 0
        scores[at : at + len(d)] = d
        prev = planes[-1:]
    return scores


def _detect_array(video: np.ndarray, config: DetectorConfig, fps) -> ShotList:
    """Same decisions as the streaming detector, scored in vectorised chunks."""
    n = len(video)
    if n == 0:
        raise EmptyFrame("no frames were supplied")
    if video.shape[-1] != 3:
        raise DimensionMismatch(f"expected (N, H, W, 3) RGB video, got shape {video.shape}")
    if video.shape[1] * video.shape[2] == 0:
        raise EmptyFrame("frame has no pixels")
    scores = _array_scores(video)
    boundaries = []
    start = 0
    for i in np.flatnonzero(scores > config.threshold) + 1:
        if i - start >= config.min_shot_frames:
            boundaries.append(int(i))
            start = i
    return ShotList(fps, tuple(boundaries), n)


# -- frame sources ---------------------------------------------------------


def iter_raw_frames(stream: BinaryIO, width: int, height: int) -> Iterator[np.ndarray]:
    """Yield (H, W, 3) uint8 frames from a raw RGB24 byte stream."""
    size = width * height * 3
    if size <= 0:
        raise EmptyFrame(f"invalid frame size {width}x{height}")
    while True:
        buf = stream.read(size)
        if not buf:
            return
        while len(buf) < size:
            more = stream.read(size - len(buf))
            if not more:
                raise ValidationError(f"truncated raw stream: partial frame of {len(buf)} bytes")
            buf += more
        yield np.frombuffer(buf, dtype=np.uint8).reshape(height, width, 3)


class RawVideo:
    """Random-access view of a raw RGB24 file (memory-mapped)."""

    def __init__(self, path, width: int, height: int):
        nbytes = Path(path).stat().st_size
        size = width * height * 3
        if size <= 0 or nbytes % size:
            raise ValidationError(f"{path}: size {nbytes} is not a whole number of {width}x{height} frames")
        if nbytes:
            self._data = np.memmap(path, dtype=np.uint8, mode="r").reshape(-1, height, width, 3)
        else:
            self._data = np.zeros((0, height, width, 3), np.uint8)

    def __len__(self) -> int:
        return len(self._data)

    def __getitem__(self, i):
        return np.asarray(self._data[i])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]


class PngDirectory:
    """Numbered PNG frames in a directory, ordered by the digits in their names."""

    def __init__(self, path):
        from PIL import Image  # noqa: F401  (fail early if Pillow is missing)

        files = sorted(Path(path).glob("*.png"), key=_frame_number)
        if not files:
            raise ValidationError(f"no PNG frames in {path}")
        self.files = files

    def __len__(self) -> int:
        return len(self.files)

    def __getitem__(self, i) -> np.ndarray:
        from PIL import Image

        with Image.open(self.files[i]) as im:
            return np.asarray(im.convert("RGB"))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]


def _frame_number(p: Path):
    digits = "".join(ch for ch in p.stem if ch.isdigit())
    return (int(digits) if digits else -1, p.name)


def open_frames(src, width: int | None = None, height: int | None = None):
    """Resolve a CLI frame source: ``-`` (stdin), a raw RGB24 file, or a PNG directory.

    Stdin is buffered into memory since it cannot be re-read.
    """
    if src == "-":
        if not width or not height:
            raise ValidationError("--width and --height are required for raw frame input")
        frames = list(iter_raw_frames(sys.stdin.buffer, width, height))
        return np.stack(frames) if frames else np.zeros((0, height, width, 3), np.uint8)
    path = Path(src)
    if path.is_dir():
        return PngDirectory(path)
    if not width or not height:
        raise ValidationError("--width and --height are required for raw frame input")
    return RawVideo(path, width, height)


def write_shotlist(shots: ShotList, fh) -> None:
    json.dump(shots.to_json(), fh)
    fh.write("\n")
