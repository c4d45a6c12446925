"""The mutable B-roll timeline and its editing operations.

A timeline is an ordered sequence of trimmed sub-clip references. The
four mutation tools validate before touching state, so a failed call
leaves the timeline exactly as it was.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .collection import (
    LookupOutcome,
    VideoCollection,
    best_overlap_segment,
    segment_lookup,
)
from .errors import (
    BadIndex,
    EmptyCollection,
    InvertedRange,
    OutOfBounds,
    SchemaError,
    UnknownFile,
)

UNTRIMMED_DEFAULT = "(untrimmed source)"


@dataclass(frozen=True)
class TimelineClip:
    source_file: str
    start_s: float
    end_s: float
    description: str
    shot_type: str
    camera_motion: str

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


class Timeline:
    """Ordered clip list with a revision counter bumped on every mutation."""

    def __init__(self, clips: Optional[list[TimelineClip]] = None):
        self.clips: list[TimelineClip] = list(clips) if clips else []
        self.revision = 0

    def __len__(self) -> int:
        return len(self.clips)

    def snapshot(self) -> "Timeline":
        """Immutable-by-convention copy sharing the (frozen) clips."""
        copy = Timeline(self.clips)
        copy.revision = self.revision
        return copy

    def _check_index(self, k: int, *, allow_end: bool = False):
        limit = len(self.clips) + (1 if allow_end else 0)
        if not isinstance(k, int) or k < 0 or k >= limit:
            raise BadIndex(f"index {k} out of range for {len(self.clips)} clips")

    def add(self, collection: VideoCollection, source_file: str, k: int,
            t_s: float, t_e: float) -> "Timeline":
        """Insert the sub-clip [t_s, t_e] of source_file at index k."""
        outcome = segment_lookup(collection, source_file, t_s, t_e)
        if outcome is LookupOutcome.UNKNOWN_FILE:
            raise UnknownFile(f"{source_file!r} is not in the collection")
        if outcome is LookupOutcome.INVERTED_RANGE:
            raise InvertedRange(f"start {t_s} must be before end {t_e}")
        if outcome is LookupOutcome.OUT_OF_BOUNDS:
            duration = collection.source_durations[source_file]
            raise OutOfBounds(
                f"[{t_s}, {t_e}] exceeds {source_file!r} duration {duration}")
        self._check_index(k, allow_end=True)
        segment = best_overlap_segment(collection, source_file, t_s, t_e)
        if segment is not None:
            clip = TimelineClip(source_file, t_s, t_e, segment.description,
                                segment.shot_type, segment.camera_motion)
        else:
            clip = TimelineClip(source_file, t_s, t_e, UNTRIMMED_DEFAULT,
                                UNTRIMMED_DEFAULT, UNTRIMMED_DEFAULT)
        self.clips.insert(k, clip)
        self.revision += 1
        return self

    def remove(self, k: int) -> "Timeline":
        self._check_index(k)
        del self.clips[k]
        self.revision += 1
        return self

    def switch(self, k: int, l: int) -> "Timeline":
        self._check_index(k)
        self._check_index(l)
        self.clips[k], self.clips[l] = self.clips[l], self.clips[k]
        self.revision += 1
        return self

    def move(self, k: int, l: int) -> "Timeline":
        self._check_index(k)
        self._check_index(l)
        clip = self.clips.pop(k)
        self.clips.insert(l, clip)
        self.revision += 1
        return self

    def total_duration(self) -> float:
        return sum(c.duration_s for c in self.clips)


def render_view(timeline: Timeline, audience: str) -> str:
    """Deterministic textual listing of the timeline for one agent.

    The critic sees index, file, duration and description; the editor
    additionally sees shot type, camera motion and trim bounds.
    """
    if audience not in ("editor", "critic"):
        raise ValueError(f"unknown audience {audience!r}")
    if not timeline.clips:
        return "(timeline is empty)"
    lines = []
    for i, clip in enumerate(timeline.clips):
        parts = [
            f"#{i}",
            f"file: {clip.source_file}",
            f"duration: {clip.duration_s:.1f}s",
        ]
        if audience == "editor":
            parts += [
                f"start: {clip.start_s:.1f}s",
                f"end: {clip.end_s:.1f}s",
                f"shot: {clip.shot_type}",
                f"motion: {clip.camera_motion}",
            ]
        parts.append(f"description: {clip.description}")
        lines.append(" | ".join(parts))
    return "\n".join(lines)


def init_random(collection: VideoCollection, n: int, seed: int) -> Timeline:
    """Timeline of n segments drawn at random from the collection.

    Sampling is without replacement unless n exceeds the segment count.
    """
    if not collection.segments:
        raise EmptyCollection("cannot initialize from an empty collection")
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = random.Random(seed)
    if n <= len(collection.segments):
        chosen = rng.sample(collection.segments, n)
    else:
        chosen = rng.choices(collection.segments, k=n)
    timeline = Timeline()
    for segment in chosen:
        timeline.clips.append(TimelineClip(
            source_file=segment.source_file,
            start_s=segment.start_s,
            end_s=segment.end_s,
            description=segment.description,
            shot_type=segment.shot_type,
            camera_motion=segment.camera_motion,
        ))
    timeline.revision += 1
    return timeline


def timeline_to_dict(timeline: Timeline, request: Optional[str] = None,
                     history_ref: Optional[str] = None) -> dict:
    return {
        "request": request,
        "clips": [
            {
                "file": c.source_file,
                "start_s": c.start_s,
                "end_s": c.end_s,
                "description": c.description,
                "shot_type": c.shot_type,
                "camera_motion": c.camera_motion,
            }
            for c in timeline.clips
        ],
        "history_ref": history_ref,
    }


def save_timeline(timeline: Timeline, path: str | Path,
                  request: Optional[str] = None,
                  history_ref: Optional[str] = None):
    payload = timeline_to_dict(timeline, request, history_ref)
    Path(path).write_text(json.dumps(payload, indent=2) + "\n",
                          encoding="utf-8")


def load_timeline(path: str | Path) -> tuple[Timeline, Optional[str]]:
    """Read a timeline file; returns (timeline, request)."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    if not isinstance(data, dict) or "clips" not in data:
        raise SchemaError(f"{path}: not a timeline file")
    clips = []
    for i, raw in enumerate(data["clips"]):
        try:
            clips.append(TimelineClip(
                source_file=str(raw["file"]),
                start_s=float(raw["start_s"]),
                end_s=float(raw["end_s"]),
                description=str(raw.get("description", "")),
                shot_type=str(raw.get("shot_type", "")),
                camera_motion=str(raw.get("camera_motion", "")),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"{path}: clips[{i}]: {exc}") from exc
    timeline = Timeline(clips)
    return timeline, data.get("request")
