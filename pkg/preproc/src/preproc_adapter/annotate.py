"""Segment annotation: captions, labels, embeddings, midpoint keyframes.

The bundled captioner and classifier are deterministic stubs driven by
frame statistics; swapping in real models only changes the text and
labels, never the emitted schema.
"""

from __future__ import annotations

import difflib
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol

import cv2
import numpy as np

from .config import AdapterConfig
from .errors import DecodeError, ModelError
from .segmenter import SegmentBoundary

SHOT_TYPES = ["extreme close-up", "close-up", "medium", "full", "long"]
CAMERA_MOTIONS = ["static", "zoom in", "vertical static/moving", "aerial",
                  "travelling in/out", "handheld", "panoramic",
                  "panoramic lateral"]


@dataclass
class SegmentRecord:
    source_file: str
    start_s: float
    duration_s: float
    level: int
    description: str
    shot_type: str
    camera_motion: str
    embedding: list[float]
    keyframe: Optional[str]
    flags: list[str] = field(default_factory=list)


class Captioner(Protocol):
    def caption(self, frames: np.ndarray, boundary: SegmentBoundary) -> str:
        ...


class Classifier(Protocol):
    def classify(self, frames: np.ndarray,
                 boundary: SegmentBoundary) -> tuple[str, str]:
        """Returns (shot_type, camera_motion)."""


class StubCaptioner:
    """Caption from coarse frame statistics; deterministic and offline."""

    def caption(self, frames: np.ndarray, boundary: SegmentBoundary) -> str:
        brightness = float(frames.mean())
        tone = ("dark" if brightness < 85
                else "dim" if brightness < 170 else "bright")
        return (f"a {tone} {boundary.duration_s:.1f} second shot from "
                f"{boundary.source_file} starting at {boundary.start_s:.1f}s")


class StubClassifier:
    """Deterministic labels keyed off frame statistics."""

    def classify(self, frames: np.ndarray,
                 boundary: SegmentBoundary) -> tuple[str, str]:
        brightness = int(frames.mean())
        motion = float(np.abs(np.diff(frames.astype(np.int16),
                                      axis=0)).mean()) if len(frames) > 1 \
            else 0.0
        shot = SHOT_TYPES[brightness % len(SHOT_TYPES)]
        camera = "static" if motion < 1.0 else \
            CAMERA_MOTIONS[1 + brightness % (len(CAMERA_MOTIONS) - 1)]
        return shot, camera


def snap_to_vocabulary(label: str, vocabulary: list[str]
                       ) -> tuple[str, bool]:
    """Return (label in vocabulary, whether it had to be remapped)."""
    if label in vocabulary:
        return label, False
    close = difflib.get_close_matches(label, vocabulary, n=1, cutoff=0.0)
    return close[0], True


def embed_text(text: str, dim: int, seed: int) -> list[float]:
    digest = hashlib.sha256(f"{seed}:{text}".encode()).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
    vector = rng.standard_normal(dim)
    vector /= np.linalg.norm(vector)
    return [float(x) for x in vector]


def sample_frames(path: Path, start_s: float, duration_s: float,
                  count: int) -> np.ndarray:
    """Exactly ``count`` frames sampled uniformly across the segment."""
    capture = cv2.VideoCapture(str(path))
    try:
        if not capture.isOpened():
            raise DecodeError(f"cannot open {path}")
        fps = capture.get(cv2.CAP_PROP_FPS)
        total = int(capture.get(cv2.CAP_PROP_FRAME_COUNT))
        first = int(start_s * fps)
        last = min(int((start_s + duration_s) * fps), total) - 1
        indices = np.linspace(first, max(first, last), count).astype(int)
        frames = []
        for index in indices:
            capture.set(cv2.CAP_PROP_POS_FRAMES, int(index))
            ok, frame = capture.read()
            if not ok:
                raise DecodeError(f"cannot read frame {index} of {path}")
            frames.append(frame)
        return np.stack(frames)
    finally:
        capture.release()


def write_midpoint_keyframe(path: Path, boundary: SegmentBoundary,
                            out_dir: Path, index: int) -> str:
    """Keyframe = frame at start_s + duration_s / 2."""
    midpoint = boundary.start_s + boundary.duration_s / 2
    capture = cv2.VideoCapture(str(path))
    try:
        if not capture.isOpened():
            raise DecodeError(f"cannot open {path}")
        fps = capture.get(cv2.CAP_PROP_FPS)
        capture.set(cv2.CAP_PROP_POS_FRAMES, int(midpoint * fps))
        ok, frame = capture.read()
        if not ok:
            raise DecodeError(f"no frame at {midpoint:.2f}s in {path}")
    finally:
        capture.release()
    out_dir.mkdir(parents=True, exist_ok=True)
    name = f"{Path(boundary.source_file).stem}_{index:04d}.png"
    cv2.imwrite(str(out_dir / name), frame)
    return name


def annotate_segments(boundaries: list[SegmentBoundary],
                      config: AdapterConfig,
                      captioner: Optional[Captioner] = None,
                      classifier: Optional[Classifier] = None,
                      ) -> list[SegmentRecord]:
    """Full records for each boundary; a per-segment model failure emits
    a flagged placeholder record instead of aborting the batch."""
    captioner = captioner or StubCaptioner()
    classifier = classifier or StubClassifier()
    media_dir = Path(config.media_dir)
    keyframes_dir = Path(config.keyframes_dir)
    records = []
    for index, boundary in enumerate(boundaries):
        path = media_dir / boundary.source_file
        frames = sample_frames(path, boundary.start_s, boundary.duration_s,
                               config.frames_per_segment)
        flags = []
        try:
            description = captioner.caption(frames, boundary)
            shot, camera = classifier.classify(frames, boundary)
        except ModelError as exc:
            description = "(captioning failed)"
            shot, camera = SHOT_TYPES[2], CAMERA_MOTIONS[0]
            flags.append(f"model_error: {exc}")
        shot, remapped = snap_to_vocabulary(shot, SHOT_TYPES)
        if remapped:
            flags.append("shot_type remapped to vocabulary")
        camera, remapped = snap_to_vocabulary(camera, CAMERA_MOTIONS)
        if remapped:
            flags.append("camera_motion remapped to vocabulary")
        keyframe = write_midpoint_keyframe(path, boundary, keyframes_dir,
                                           index)
        records.append(SegmentRecord(
            source_file=boundary.source_file,
            start_s=boundary.start_s,
            duration_s=boundary.duration_s,
            level=boundary.level,
            description=description,
            shot_type=shot,
            camera_motion=camera,
            embedding=embed_text(description, config.embedding_dim,
                                 config.seed),
            keyframe=keyframe,
            flags=flags,
        ))
    return records
