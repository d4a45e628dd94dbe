"""Model-input extraction: frame sampling, clip augmentation, audio windows
and log-mel spectrograms."""

from __future__ import annotations

import logging
import math
import struct
import wave
import warnings
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import SampleRateMismatch, SpanTooShort, TooFewSamples, ValidationError
from .timeline import FrameSpan, as_fps

log = logging.getLogger(__name__)

SAMPLE_RATE = 44100
N_FFT = 2048
HOP = 512
N_MELS = 128
LOG_FLOOR = 1e-10
SAMPLES_PER_VIDEO_FRAME = 1728


# -- frame sampling --------------------------------------------------------


@dataclass(frozen=True)
class SamplingSpec:
    frame_count: int = 16
    pad_frames: int = 10
    mode: str = "strict"

    def __post_init__(self):
        if self.frame_count < 1 or self.pad_frames < 0:
            raise ValidationError(f"invalid sampling spec {self}")
        if self.mode not in ("strict", "clamp"):
            raise ValidationError(f"sampling mode must be 'strict' or 'clamp', got {self.mode!r}")

    @property
    def min_span_frames(self) -> int:
        return self.frame_count + 2 * self.pad_frames


def sample_frame_indices(span: FrameSpan | tuple[int, int], spec: SamplingSpec) -> list[int]:
    """Pick ``spec.frame_count`` frame indices spread uniformly over a span.

    With enough frames the padded window ``[start+pad, end-pad)`` is sampled
    end to end (first and last window frames always included). In clamp mode
    a shorter span drops its padding and each output slot takes the frame
    under the centre of its ``1/frame_count`` share of the span, so frames
    repeat as evenly as possible.
    """
    start, end = (span.start_frame, span.end_frame) if isinstance(span, FrameSpan) else span
    n = spec.frame_count
    length = end - start
    if length >= spec.min_span_frames:
        first = start + spec.pad_frames
        window = length - 2 * spec.pad_frames
        if n == 1:
            return [first + (window - 1) // 2]
        # round-half-up of k*(window-1)/(n-1), in integers
        return [first + (2 * k * (window - 1) + (n - 1)) // (2 * (n - 1)) for k in range(n)]
    if spec.mode == "strict":
        raise SpanTooShort(f"span of {length} frames is shorter than the minimum {spec.min_span_frames}")
    if length < 1:
        raise SpanTooShort("cannot sample from an empty span")
    return [start + ((2 * k + 1) * length) // (2 * n) for k in range(n)]


# -- augmentation ----------------------------------------------------------


@dataclass(frozen=True)
class AugmentationConfig:
    scale_range: tuple[float, float] = (0.5, 1.0)
    aspect_range: tuple[float, float] = (0.75, 1.33)
    hflip_prob: float = 0.5
    output_size: int = 224
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.scale_range
        if not 0.0 < lo <= hi <= 1.0:
            raise ValidationError(f"scale_range must lie in (0, 1], got {self.scale_range}")
        lo, hi = self.aspect_range
        if not 0.0 < lo <= hi:
            raise ValidationError(f"invalid aspect_range {self.aspect_range}")
        if not 0.0 <= self.hflip_prob <= 1.0:
            raise ValidationError(f"hflip_prob must be in [0, 1], got {self.hflip_prob}")
        if self.output_size < 1:
            raise ValidationError("output_size must be positive")

    @classmethod
    def identity(cls, output_size: int = 224) -> "AugmentationConfig":
        return cls(scale_range=(1.0, 1.0), aspect_range=(1.0, 1.0), hflip_prob=0.0, output_size=output_size)


@dataclass(frozen=True)
class CropDraw:
    top: int
    left: int
    height: int
    width: int
    flip: bool


def to_float(frame: np.ndarray) -> np.ndarray:
    frame = np.asarray(frame)
    if frame.dtype == np.uint8:
        return frame.astype(np.float32) / np.float32(255.0)
    return frame.astype(np.float32, copy=False)


def _axis_weights(n_in: int, n_out: int):
    # half-pixel centres, edge-clamped
    x = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    x = np.clip(x, 0.0, n_in - 1)
    i0 = np.floor(x).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    w1 = x - i0
    return i0, i1, w1


def resize_bilinear(image: np.ndarray, height: int, width: int | None = None) -> np.ndarray:
    """Bilinear resize of an (H, W, C) array; returns float32."""
    width = height if width is None else width
    img = np.asarray(image, dtype=np.float64)
    y0, y1, wy = _axis_weights(img.shape[0], height)
    x0, x1, wx = _axis_weights(img.shape[1], width)
    wy = wy[:, None, None]
    wx = wx[None, :, None]
    top = img[y0][:, x0] * (1 - wx) + img[y0][:, x1] * wx
    bot = img[y1][:, x0] * (1 - wx) + img[y1][:, x1] * wx
    return (top * (1 - wy) + bot * wy).astype(np.float32)


def hflip(frame: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(frame)[:, ::-1])


def draw_crop(height: int, width: int, config: AugmentationConfig, rng: np.random.Generator) -> CropDraw:
    """One random crop/flip draw; the crop area is a fraction of the frame
    area and its aspect is relative to the frame's own aspect."""
    scale = rng.uniform(*config.scale_range)
    log_lo, log_hi = math.log(config.aspect_range[0]), math.log(config.aspect_range[1])
    aspect = math.exp(rng.uniform(log_lo, log_hi))
    flip = bool(rng.random() < config.hflip_prob)
    cw = min(width, max(1, round(width * math.sqrt(scale * aspect))))
    ch = min(height, max(1, round(height * math.sqrt(scale / aspect))))
    top = int(rng.integers(0, height - ch + 1))
    left = int(rng.integers(0, width - cw + 1))
    return CropDraw(top, left, ch, cw, flip)


def apply_crop(frame: np.ndarray, draw: CropDraw, output_size: int) -> np.ndarray:
    img = to_float(frame)[draw.top : draw.top + draw.height, draw.left : draw.left + draw.width]
    if draw.flip:
        img = hflip(img)
    return resize_bilinear(img, output_size)


def augment_clip(frames: Sequence[np.ndarray], config: AugmentationConfig, rng=None) -> np.ndarray:
    """Apply one crop/aspect/flip draw identically to every frame of a clip.

    Returns a float32 array (T, S, S, 3) in [0, 1]. ``rng`` may be a numpy
    Generator or a seed; ``None`` falls back to ``config.seed``.
    """
    if len(frames) == 0:
        raise ValidationError("augment_clip needs at least one frame")
    shape = np.asarray(frames[0]).shape
    if any(np.asarray(f).shape != shape for f in frames):
        raise ValidationError("all frames in a clip must share dimensions")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(config.seed if rng is None else rng)
    draw = draw_crop(shape[0], shape[1], config, rng)
    return np.stack([apply_crop(f, draw, config.output_size) for f in frames])


def augment_images(frames: Sequence[np.ndarray], config: AugmentationConfig, rng=None) -> np.ndarray:
    """Independent draw per image (image-classifier training path)."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(config.seed if rng is None else rng)
    out = []
    for f in frames:
        f = np.asarray(f)
        out.append(apply_crop(f, draw_crop(f.shape[0], f.shape[1], config, rng), config.output_size))
    return np.stack(out)


# -- audio -----------------------------------------------------------------


@dataclass(frozen=True)
class AudioMeta:
    sample_rate: int
    n_samples: int
    fps: Fraction

    def __post_init__(self):
        object.__setattr__(self, "fps", as_fps(self.fps))


@dataclass(frozen=True)
class AudioWindow:
    start_sample: int
    sample_count: int
    sample_rate: int = SAMPLE_RATE
    samples_per_video_frame: int = SAMPLES_PER_VIDEO_FRAME


def audio_window_for_span(
    span: FrameSpan | tuple[int, int],
    spec: SamplingSpec,
    audio_meta: AudioMeta,
    samples_per_video_frame: int = SAMPLES_PER_VIDEO_FRAME,
) -> AudioWindow:
    """Audio window of ``frame_count * samples_per_video_frame`` samples,
    centred on the time midpoint of the sampled frames."""
    idx = sample_frame_indices(span, spec)
    count = spec.frame_count * samples_per_video_frame
    natural = Fraction(audio_meta.sample_rate) / audio_meta.fps
    if natural != samples_per_video_frame:
        log.debug(
            "samples_per_video_frame=%d differs from sample_rate/fps=%.2f; audio window spans %.3f video frames",
            samples_per_video_frame,
            float(natural),
            count / float(natural),
        )
    mid_frame = Fraction(idx[0] + idx[-1] + 1, 2)
    centre = mid_frame / audio_meta.fps * audio_meta.sample_rate
    start = math.floor(centre - Fraction(count, 2) + Fraction(1, 2))
    return AudioWindow(start, count, audio_meta.sample_rate, samples_per_video_frame)


def extract_window(pcm: np.ndarray, window: AudioWindow) -> np.ndarray:
    """Slice ``pcm`` for ``window``, zero-padding (with a warning) past either end."""
    pcm = np.asarray(pcm)
    lo, hi = window.start_sample, window.start_sample + window.sample_count
    out = np.zeros(window.sample_count, dtype=np.float64)
    src_lo, src_hi = max(lo, 0), min(hi, len(pcm))
    if src_lo < src_hi:
        out[src_lo - lo : src_hi - lo] = pcm[src_lo:src_hi]
    if lo < 0 or hi > len(pcm):
        warnings.warn(
            f"audio window [{lo}, {hi}) exceeds the {len(pcm)} available samples; zero-padded",
            stacklevel=2,
        )
    return out


def read_wav(path) -> tuple[np.ndarray, int]:
    """Read a 16-bit mono PCM WAV at 44.1 kHz; returns float samples in [-1, 1)."""
    with wave.open(str(path), "rb") as w:
        if w.getnchannels() != 1:
            raise ValidationError(f"{path}: expected mono audio, got {w.getnchannels()} channels")
        if w.getsampwidth() != 2:
            raise ValidationError(f"{path}: expected 16-bit PCM, got {8 * w.getsampwidth()}-bit")
        if w.getframerate() != SAMPLE_RATE:
            raise SampleRateMismatch(f"{path}: expected {SAMPLE_RATE} Hz, got {w.getframerate()} Hz")
        raw = w.readframes(w.getnframes())
    return np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0, SAMPLE_RATE


def write_wav(path, pcm: np.ndarray, sample_rate: int = SAMPLE_RATE) -> None:
    data = np.clip(np.round(np.asarray(pcm) * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(sample_rate)
        w.writeframes(data.tobytes())


# -- spectrograms ----------------------------------------------------------


@dataclass(frozen=True)
class MelSpectrogram:
    values: np.ndarray  # (n_mels, n_frames)

    @property
    def n_mels(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def n_stft_frames(n_samples: int, n_fft: int = N_FFT, hop: int = HOP) -> int:
    return 1 + (n_samples - n_fft) // hop


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def stft_power(pcm: np.ndarray, n_fft: int = N_FFT, hop: int = HOP) -> np.ndarray:
    """One-sided |STFT|^2, shape (n_fft//2 + 1, n_frames), no centre padding."""
    x = np.asarray(pcm, dtype=np.float64)
    if x.ndim != 1:
        raise ValidationError("expected mono 1-D samples")
    if len(x) < n_fft:
        raise TooFewSamples(f"{len(x)} samples is fewer than n_fft={n_fft}")
    n_frames = n_stft_frames(len(x), n_fft, hop)
    frames = np.lib.stride_tricks.sliding_window_view(x, n_fft)[::hop][:n_frames]
    spec = np.fft.rfft(frames * hann_window(n_fft), axis=1)
    return (spec.real**2 + spec.imag**2).T


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_center_frequencies(n_mels: int = N_MELS, sr: int = SAMPLE_RATE, fmin: float = 0.0, fmax: float | None = None):
    fmax = sr / 2 if fmax is None else fmax
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    return edges[1:-1]


def mel_filterbank(sr: int = SAMPLE_RATE, n_fft: int = N_FFT, n_mels: int = N_MELS, fmin: float = 0.0, fmax=None):
    """Triangular HTK-mel filters with unit peak, shape (n_mels, n_fft//2 + 1)."""
    fmax = sr / 2 if fmax is None else fmax
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    freqs = np.arange(n_fft // 2 + 1) * sr / n_fft
    lower, centre, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lower) / (centre - lower)
    falling = (upper - freqs) / (upper - centre)
    return np.maximum(0.0, np.minimum(rising, falling))


def mel_spectrogram(
    pcm: np.ndarray,
    sr: int = SAMPLE_RATE,
    n_fft: int = N_FFT,
    hop: int = HOP,
    n_mels: int = N_MELS,
) -> MelSpectrogram:
    if sr != SAMPLE_RATE:
        raise SampleRateMismatch(f"expected {SAMPLE_RATE} Hz audio, got {sr} Hz")
    power = stft_power(pcm, n_fft, hop)
    mel = mel_filterbank(sr, n_fft, n_mels) @ power
    return MelSpectrogram(np.log(mel + LOG_FLOOR))


def save_spectrogram(spec: MelSpectrogram, path) -> None:
    """Header of two little-endian int32 (n_mels, n_frames), then row-major float32."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<ii", spec.n_mels, spec.n_frames))
        fh.write(np.ascontiguousarray(spec.values, dtype="<f4").tobytes())


def load_spectrogram(path) -> MelSpectrogram:
    data = Path(path).read_bytes()
    if len(data) < 8:
        raise ValidationError(f"{path}: truncated spectrogram header")
    n_mels, n_frames = struct.unpack_from("<ii", data)
    body = np.frombuffer(data, dtype="<f4", offset=8)
    if body.size != n_mels * n_frames:
        raise ValidationError(f"{path}: expected {n_mels * n_frames} floats, found {body.size}")
    return MelSpectrogram(body.reshape(n_mels, n_frames).astype(np.float64))
