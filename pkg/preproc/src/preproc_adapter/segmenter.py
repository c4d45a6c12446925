"""Segment boundary extraction.

The full pipeline would derive a segment hierarchy from temporal
clustering; this adapter ships the deterministic uniform fallback:
level 0 slices each source into fixed windows and each deeper level
halves the window. Boundaries shorter than one second are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import cv2

from .errors import DecodeError

MIN_SEGMENT_SECONDS = 1.0
VIDEO_SUFFIXES = {".mp4", ".mov", ".avi", ".mkv", ".webm"}


@dataclass(frozen=True)
class SegmentBoundary:
    source_file: str
    start_s: float
    duration_s: float
    level: int


def probe_duration(path: str | Path) -> float:
    capture = cv2.VideoCapture(str(path))
    try:
        if not capture.isOpened():
            raise DecodeError(f"cannot open {path}")
        fps = capture.get(cv2.CAP_PROP_FPS)
        frames = capture.get(cv2.CAP_PROP_FRAME_COUNT)
        if fps <= 0 or frames <= 0:
            raise DecodeError(f"no decodable stream in {path}")
        return frames / fps
    finally:
        capture.release()


def uniform_boundaries(source_file: str, duration_s: float, window_s: float,
                       depth: int) -> list[SegmentBoundary]:
    boundaries = []
    for level in range(depth):
        window = window_s / (2 ** level)
        start = 0.0
        while start < duration_s:
            length = min(window, duration_s - start)
            if length >= MIN_SEGMENT_SECONDS:
                boundaries.append(SegmentBoundary(
                    source_file=source_file, start_s=start,
                    duration_s=length, level=level))
            start += window
    return boundaries


def extract_segments(media_dir: str | Path, window_s: float = 4.0,
                     depth: int = 2
                     ) -> tuple[list[SegmentBoundary], dict, list[str]]:
    """Scan a directory of videos into (boundaries, durations, warnings).

    Unreadable files are skipped with a warning rather than aborting
    the batch.
    """
    root = Path(media_dir)
    if not root.is_dir():
        raise DecodeError(f"not a directory: {media_dir}")
    boundaries: list[SegmentBoundary] = []
    durations: dict[str, float] = {}
    warnings: list[str] = []
    for path in sorted(root.iterdir()):
        if path.suffix.lower() not in VIDEO_SUFFIXES:
            continue
        try:
            duration = probe_duration(path)
        except DecodeError as exc:
            warnings.append(f"skipped {path.name}: {exc}")
            continue
        durations[path.name] = duration
        boundaries.extend(
            uniform_boundaries(path.name, duration, window_s, depth))
    return boundaries, durations, warnings
