"""Scene segmentation for broadcast news video.

Shots are found with an HSV content detector, classified by frame, video,
audio, or fused audio-visual models, and merged into labelled timelines that
are scored by duration.
"""

__version__ = "0.1.0"
