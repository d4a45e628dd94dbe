"""Regenerate ``table1.json``: a 41-video synthetic corpus whose class
distribution matches the published per-label clip counts and durations.

Run from the repository root::

    python fixtures/make_table1.py
"""

import json
from pathlib import Path

import numpy as np

FPS = 25
N_VIDEOS = 41
VIDEO_FRAMES = 50 * 60 * FPS
MIN_CLIP_FRAMES = 40

# label -> (clips, mean seconds)
TABLE = {
    "Advertisement": (126, 62.75),
    "Story": (631, 78.03),
    "Studio": (655, 30.38),
    "Transition": (295, 7.82),
    "Visualisation": (125, 36.28),
}


def clip_lengths(rng, count, mean_s):
    target = round(count * mean_s * FPS)
    lengths = np.maximum(MIN_CLIP_FRAMES, np.round(rng.gamma(4.0, mean_s * FPS / 4.0, count))).astype(int)
    lengths = np.maximum(MIN_CLIP_FRAMES, np.round(lengths * target / lengths.sum())).astype(int)
    while (diff := target - lengths.sum()) != 0:
        step = 1 if diff > 0 else -1
        idx = rng.choice(np.flatnonzero(lengths + step >= MIN_CLIP_FRAMES), size=min(abs(diff), count))
        np.add.at(lengths, idx, step)
        lengths = np.maximum(lengths, MIN_CLIP_FRAMES)
    return lengths.tolist()


def build(seed=1832):
    rng = np.random.default_rng(seed)
    clips = [(label, n) for label, (count, mean_s) in TABLE.items() for n in clip_lengths(rng, count, mean_s)]
    order = rng.permutation(len(clips))
    per_video = [[] for _ in range(N_VIDEOS)]
    for k, idx in enumerate(order):
        per_video[k % N_VIDEOS].append(clips[idx])
    videos = []
    for v, items in enumerate(per_video):
        regions = []
        cursor = int(rng.integers(0, 250))
        for label, n in items:
            regions.append({"start_frame": cursor, "end_frame": cursor + n, "label": label})
            cursor += n + int(rng.integers(0, 50))
        videos.append(
            {
                "video_id": f"news{v:02d}",
                "fps": FPS,
                "frame_count": max(VIDEO_FRAMES, cursor),
                "width": 384,
                "height": 216,
                "audio_sample_rate": 44100,
                "regions": regions,
            }
        )
    return {"videos": videos}


if __name__ == "__main__":
    out = Path(__file__).with_name("table1.json")
    out.write_text(json.dumps(build(), separators=(",", ":")) + "\n")
    print(f"wrote {out}")
