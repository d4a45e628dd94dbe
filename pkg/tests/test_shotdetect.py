import colorsys
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from newsseg import shotdetect
from newsseg.errors import DimensionMismatch, EmptyFrame, ValidationError
from newsseg.shotdetect import (
    ContentDetector,
    DetectorConfig,
    PngDirectory,
    RawVideo,
    ShotList,
    content_score,
    detect_shots,
    frame_stats,
    iter_raw_frames,
    rgb_to_hsv,
)
from newsseg.synthetic import color_block_video


def solid(rgb, size=(8, 8)):
    return np.broadcast_to(np.array(rgb, np.uint8), (*size, 3)).copy()


def colorsys_hsv(frame):
    """Per-pixel stdlib conversion scaled to 0..255."""
    out = np.empty((3, *frame.shape[:2]))
    for i in range(frame.shape[0]):
        for j in range(frame.shape[1]):
            h, s, v = colorsys.rgb_to_hsv(*(frame[i, j] / 255.0))
            out[:, i, j] = (255 * h, 255 * s, 255 * v)
    return out


class TestHSV:
    def test_black_white_red(self):
        k = frame_stats(solid((0, 0, 0)))
        assert (k.mean_h, k.mean_s, k.mean_v) == (0.0, 0.0, 0.0)
        w = frame_stats(solid((255, 255, 255)))
        assert (w.mean_h, w.mean_s, w.mean_v) == (0.0, 0.0, 255.0)
        r = frame_stats(solid((255, 0, 0)))
        assert (r.mean_h, r.mean_s, r.mean_v) == (0.0, 255.0, 255.0)

    def test_matches_colorsys(self):
        frame = np.random.default_rng(0).integers(0, 256, (6, 7, 3), dtype=np.uint8)
        np.testing.assert_allclose(rgb_to_hsv(frame), colorsys_hsv(frame), atol=1e-9)

    def test_rejects_bad_shapes(self):
        with pytest.raises(DimensionMismatch):
            rgb_to_hsv(np.zeros((4, 4), np.uint8))
        with pytest.raises(EmptyFrame):
            rgb_to_hsv(np.zeros((0, 4, 3), np.uint8))
        with pytest.raises(DimensionMismatch):
            content_score(solid((0, 0, 0), (4, 4)), solid((0, 0, 0), (4, 5)))


class TestScore:
    def test_black_to_white(self):
        assert content_score(solid((0, 0, 0)), solid((255, 255, 255))) == pytest.approx(85.0)

    def test_identical_is_zero(self):
        f = np.random.default_rng(1).integers(0, 256, (5, 5, 3), dtype=np.uint8)
        assert content_score(f, f) == 0.0

    def test_symmetric(self):
        rng = np.random.default_rng(2)
        a, b = (rng.integers(0, 256, (5, 5, 3), dtype=np.uint8) for _ in range(2))
        assert content_score(a, b) == pytest.approx(content_score(b, a))


class TestDetector:
    def test_single_cut(self):
        video = color_block_video([20, 20], [(0, 0, 0), (255, 255, 255)])
        shots = detect_shots(video)
        assert shots.boundaries == (20,)
        assert shots.spans == [(0, 20), (20, 40)]

    def test_no_cut_in_constant_video(self):
        assert detect_shots(color_block_video([50], [(10, 200, 30)])).boundaries == ()

    def test_short_shot_suppressed(self):
        video = color_block_video([20, 5, 20], [(0, 0, 0), (255, 255, 255), (0, 0, 0)])
        det = ContentDetector()
        for f in video:
            det.push(f)
        # the cut back to black arrives only 5 frames into the white shot
        assert det.finish(25).boundaries == (20,)

    def test_threshold_is_strict(self):
        video = color_block_video([20, 20], [(0, 0, 0), (255, 255, 255)])
        assert detect_shots(video, DetectorConfig(threshold=85.0)).boundaries == ()
        assert detect_shots(video, DetectorConfig(threshold=84.9)).boundaries == (20,)

    def test_empty_stream(self):
        with pytest.raises(EmptyFrame):
            detect_shots([])

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            DetectorConfig(threshold=0)
        with pytest.raises(ValidationError):
            DetectorConfig(min_shot_frames=0)

    def test_scores_have_one_per_transition(self):
        det = ContentDetector()
        for f in color_block_video([3, 3], [(0, 0, 0), (255, 255, 255)]):
            det.push(f)
        assert det.scores == [0.0, 0.0, pytest.approx(85.0), 0.0, 0.0]


class TestShotList:
    def test_tiles_video(self):
        shots = ShotList(25, (10, 30), 50)
        spans = shots.spans
        assert spans[0][0] == 0 and spans[-1][1] == 50
        assert all(a[1] == b[0] for a, b in zip(spans, spans[1:]))

    def test_round_trip(self):
        shots = ShotList("30000/1001", (5, 9), 12)
        assert ShotList.from_json(shots.to_json()) == shots

    def test_rejects_bad_boundaries(self):
        with pytest.raises(ValidationError):
            ShotList(25, (0, 5), 10)
        with pytest.raises(ValidationError):
            ShotList(25, (5, 5), 10)


def random_stream(seed, n=60):
    rng = np.random.default_rng(seed)
    lengths = rng.integers(1, 25, size=12)
    colors = [tuple(int(c) for c in rng.integers(0, 256, 3)) for _ in lengths]
    v = color_block_video(lengths, colors, (6, 6), noise=float(rng.uniform(0, 30)), rng=rng)
    return v[:n]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.floats(1, 80), st.floats(0, 40), st.integers(1, 20))
def test_threshold_monotone(seed, t, dt, min_len):
    video = random_stream(seed)
    low = detect_shots(video, DetectorConfig(t, min_len))
    high = detect_shots(video, DetectorConfig(t + dt + 1e-6, min_len))
    assert len(high) <= len(low)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_boundaries_respect_min_length(seed):
    shots = detect_shots(random_stream(seed), DetectorConfig(10.0, 7))
    edges = (0, *shots.boundaries)
    assert all(b - a >= 7 for a, b in zip(edges, edges[1:]))


@pytest.mark.parametrize("chunk_frames", [1, 2, 7, 1000])
def test_array_path_matches_streaming(monkeypatch, chunk_frames):
    monkeypatch.setattr(shotdetect, "_CHUNK_PIXELS", chunk_frames * 36)
    rng = np.random.default_rng(chunk_frames)
    for seed in range(15):
        video = random_stream(seed)
        cfg = DetectorConfig(float(rng.uniform(1, 80)), int(rng.integers(1, 20)))
        det = ContentDetector(cfg)
        for frame in video:
            det.push(frame)
        np.testing.assert_array_equal(shotdetect._array_scores(video), np.array(det.scores))
        assert detect_shots(video, cfg) == det.finish(25)


class TestSources:
    def test_raw_stream(self, tmp_path):
        video = color_block_video([3, 2], [(1, 2, 3), (4, 5, 6)], (4, 5))
        frames = list(iter_raw_frames(io.BytesIO(video.tobytes()), 5, 4))
        assert len(frames) == 5
        np.testing.assert_array_equal(np.stack(frames), video)
        path = tmp_path / "v.rgb"
        path.write_bytes(video.tobytes())
        raw = RawVideo(path, 5, 4)
        assert len(raw) == 5
        np.testing.assert_array_equal(raw[4], video[4])

    def test_truncated_stream(self):
        with pytest.raises(ValidationError):
            list(iter_raw_frames(io.BytesIO(b"\0" * 70), 5, 4))

    def test_png_directory(self, tmp_path):
        from PIL import Image

        video = color_block_video([2, 1], [(9, 9, 9), (200, 0, 0)], (4, 4))
        for i, f in enumerate(video):
            Image.fromarray(f).save(tmp_path / f"frame_{i:04d}.png")
        frames = PngDirectory(tmp_path)
        assert len(frames) == 3
        np.testing.assert_array_equal(frames[2], video[2])
