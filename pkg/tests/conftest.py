import json
import math
import random

import numpy as np
import pytest

from editduet.collection import (
    ArollTranscript,
    VideoCollection,
    VideoSegment,
)

SHOTS = ["extreme close-up", "close-up", "medium", "full", "long"]
MOTIONS = ["static", "zoom in", "vertical static/moving", "aerial",
           "travelling in/out", "handheld", "panoramic", "panoramic lateral"]


def make_segment(source_file="oven.mp4", start_s=0.0, duration_s=4.0,
                 description="a clip", shot_type="medium",
                 camera_motion="static", embedding=(1.0, 0.0), level=0,
                 keyframe_ref=None):
    return VideoSegment(
        source_file=source_file, start_s=start_s, duration_s=duration_s,
        description=description, shot_type=shot_type,
        camera_motion=camera_motion, embedding=tuple(embedding),
        level=level, keyframe_ref=keyframe_ref)


def make_collection(segments, source_durations=None, name="test",
                    summary="A test collection."):
    if source_durations is None:
        source_durations = {}
        for s in segments:
            source_durations[s.source_file] = max(
                source_durations.get(s.source_file, 0.0), s.end_s)
    return VideoCollection(name=name, segments=segments,
                           source_durations=source_durations,
                           summary=summary)


def angle_embedding(score):
    """2-d embedding whose cosine similarity with (1, 0) equals score."""
    theta = math.acos(max(-1.0, min(1.0, score)))
    return (math.cos(theta), math.sin(theta))


class FixedEmbedder:
    """Always returns (1, 0); pair with angle_embedding for exact scores."""

    dim = 2

    def embed(self, query):
        return np.array([1.0, 0.0])


def random_collection(rng: random.Random, n_segments: int, dim: int = 4,
                      n_files: int = 3):
    files = [f"src{f}.mp4" for f in range(n_files)]
    durations = {f: 120.0 for f in files}
    segments = []
    for _ in range(n_segments):
        f = rng.choice(files)
        start = rng.uniform(0, 100)
        duration = rng.uniform(1.0, 15.0)
        segments.append(make_segment(
            source_file=f, start_s=start,
            duration_s=min(duration, durations[f] - start),
            shot_type=rng.choice(SHOTS), camera_motion=rng.choice(MOTIONS),
            embedding=tuple(rng.gauss(0, 1) for _ in range(dim))))
    segments = [s for s in segments if s.duration_s >= 1.0]
    return make_collection(segments, source_durations=durations)


@pytest.fixture
def aroll():
    return ArollTranscript(text="We bake bread every morning.",
                           duration_s=18.0)


@pytest.fixture
def bakery_collection():
    segments = [
        make_segment("oven.mp4", 0.0, 10.0, "an oven heating up",
                     "medium", "static", (1.0, 0.0)),
        make_segment("oven.mp4", 20.0, 8.0, "bread loaves on a tray",
                     "close-up", "handheld", (0.8, 0.6)),
        make_segment("dough.mp4", 0.0, 6.0, "hands kneading dough",
                     "close-up", "static", (0.0, 1.0)),
        make_segment("dough.mp4", 10.0, 5.0, "flour on a table",
                     "full", "panoramic", (0.5, 0.5)),
    ]
    return make_collection(
        segments, source_durations={"oven.mp4": 60.0, "dough.mp4": 30.0})


def tool(name, **args):
    return json.dumps({"tool": name, "args": args})
