"""Video collection loading and validation.

The collection is the static half of the editing environment: a set of
source videos, each pre-segmented into sub-clips carrying a description,
a cinematographic shot type, a camera motion label and an embedding
vector. Segmentation, captioning and classification happen upstream;
this module only validates and exposes their output.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

from .errors import (
    DimensionError,
    EmptyCollection,
    SchemaError,
    VocabularyError,
)

logger = logging.getLogger(__name__)

SHOT_TYPES = frozenset({
    "extreme close-up",
    "close-up",
    "medium",
    "full",
    "long",
})

CAMERA_MOTIONS = frozenset({
    "static",
    "zoom in",
    "vertical static/moving",
    "aerial",
    "travelling in/out",
    "handheld",
    "panoramic",
    "panoramic lateral",
})

MIN_SEGMENT_SECONDS = 1.0


@dataclass(frozen=True)
class VideoSegment:
    """One searchable sub-clip of a source video."""

    source_file: str
    start_s: float
    duration_s: float
    description: str
    shot_type: str
    camera_motion: str
    embedding: tuple[float, ...]
    level: int = 0
    keyframe_ref: Optional[str] = None

    @property
    def end_s(self) -> float:
        return self.start_s + self.duration_s

    def overlap_with(self, start_s: float, end_s: float) -> float:
        """Length in seconds of the intersection with [start_s, end_s]."""
        return max(0.0, min(self.end_s, end_s) - max(self.start_s, start_s))


@dataclass
class VideoCollection:
    """All segments of one project plus per-source durations and a summary."""

    name: str
    segments: list[VideoSegment]
    source_durations: dict[str, float]
    summary: Optional[str] = None
    dropped_short: int = 0

    @property
    def embedding_dim(self) -> Optional[int]:
        return len(self.segments[0].embedding) if self.segments else None

    def level0_segments(self) -> list[VideoSegment]:
        return [s for s in self.segments if s.level == 0]


@dataclass(frozen=True)
class ArollTranscript:
    """Transcription of the fixed A-roll audio plus its duration."""

    text: str
    duration_s: float

    def __post_init__(self):
        if self.duration_s <= 0:
            raise SchemaError("A-roll duration must be positive")


class LookupOutcome(Enum):
    """Typed result of a sub-clip bounds check; rejections are values."""

    OK = "ok"
    UNKNOWN_FILE = "unknown_file"
    INVERTED_RANGE = "inverted_range"
    OUT_OF_BOUNDS = "out_of_bounds"

    @property
    def ok(self) -> bool:
        return self is LookupOutcome.OK


def _require(condition: bool, message: str):
    if not condition:
        raise SchemaError(message)


def _parse_segment(raw: dict, index: int) -> VideoSegment:
    loc = f"segments[{index}]"
    _require(isinstance(raw, dict), f"{loc}: expected an object")
    for key in ("file", "start_s", "duration_s", "level", "description",
                "shot_type", "camera_motion", "embedding"):
        _require(key in raw, f"{loc}: missing field '{key}'")
    if raw["shot_type"] not in SHOT_TYPES:
        raise VocabularyError(f"{loc}: unknown shot_type {raw['shot_type']!r}")
    if raw["camera_motion"] not in CAMERA_MOTIONS:
        raise VocabularyError(
            f"{loc}: unknown camera_motion {raw['camera_motion']!r}")
    embedding = raw["embedding"]
    _require(isinstance(embedding, list) and
             all(isinstance(x, (int, float)) for x in embedding),
             f"{loc}: embedding must be an array of numbers")
    start_s = float(raw["start_s"])
    duration_s = float(raw["duration_s"])
    _require(start_s >= 0, f"{loc}: start_s must be >= 0")
    _require(duration_s > 0, f"{loc}: duration_s must be > 0")
    level = raw["level"]
    _require(isinstance(level, int) and level >= 0,
             f"{loc}: level must be a non-negative integer")
    return VideoSegment(
        source_file=str(raw["file"]),
        start_s=start_s,
        duration_s=duration_s,
        description=str(raw["description"]),
        shot_type=raw["shot_type"],
        camera_motion=raw["camera_motion"],
        embedding=tuple(float(x) for x in embedding),
        level=level,
        keyframe_ref=raw.get("keyframe"),
    )


def parse_collection(data: dict) -> VideoCollection:
    """Validate already-decoded collection metadata into a VideoCollection.

    Segments shorter than one second are dropped (counted, not fatal).
    """
    _require(isinstance(data, dict), "metadata root must be an object")
    for key in ("name", "sources", "segments"):
        _require(key in data, f"missing top-level field '{key}'")
    _require(isinstance(data["sources"], list), "'sources' must be an array")
    _require(isinstance(data["segments"], list), "'segments' must be an array")

    source_durations: dict[str, float] = {}
    for i, src in enumerate(data["sources"]):
        _require(isinstance(src, dict) and "file" in src and "duration_s" in src,
                 f"sources[{i}]: expected {{file, duration_s}}")
        duration = float(src["duration_s"])
        _require(duration > 0, f"sources[{i}]: duration_s must be > 0")
        source_durations[str(src["file"])] = duration

    segments: list[VideoSegment] = []
    dropped_short = 0
    dim: Optional[int] = None
    for i, raw in enumerate(data["segments"]):
        segment = _parse_segment(raw, i)
        if segment.source_file not in source_durations:
            raise SchemaError(
                f"segments[{i}]: source {segment.source_file!r} not in sources")
        if segment.end_s > source_durations[segment.source_file] + 1e-9:
            raise SchemaError(
                f"segments[{i}]: extends past the end of {segment.source_file!r}")
        if dim is None:
            dim = len(segment.embedding)
        elif len(segment.embedding) != dim:
            raise DimensionError(
                f"segments[{i}]: embedding dimension {len(segment.embedding)} "
                f"!= {dim}")
        if segment.duration_s < MIN_SEGMENT_SECONDS:
            dropped_short += 1
            continue
        segments.append(segment)

    if dropped_short:
        logger.warning("dropped %d segments shorter than %.1f s",
                       dropped_short, MIN_SEGMENT_SECONDS)

    summary = data.get("summary")
    return VideoCollection(
        name=str(data["name"]),
        segments=segments,
        source_durations=source_durations,
        summary=summary if summary else None,
        dropped_short=dropped_short,
    )


def load_collection(metadata_file: str | Path) -> VideoCollection:
    """Load and validate a collection metadata JSON file."""
    path = Path(metadata_file)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    return parse_collection(data)


def collection_to_dict(collection: VideoCollection) -> dict:
    """Serialize a collection back into the metadata file schema."""
    return {
        "name": collection.name,
        "sources": [
            {"file": f, "duration_s": d}
            for f, d in sorted(collection.source_durations.items())
        ],
        "summary": collection.summary,
        "segments": [
            {
                "file": s.source_file,
                "start_s": s.start_s,
                "duration_s": s.duration_s,
                "level": s.level,
                "description": s.description,
                "shot_type": s.shot_type,
                "camera_motion": s.camera_motion,
                "embedding": list(s.embedding),
                "keyframe": s.keyframe_ref,
            }
            for s in collection.segments
        ],
    }


def load_transcript(transcript_file: str | Path) -> ArollTranscript:
    """Load an A-roll transcript file: {"text": ..., "duration_s": ...}."""
    path = Path(transcript_file)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    _require(isinstance(data, dict) and "text" in data and "duration_s" in data,
             "transcript must be {text, duration_s}")
    return ArollTranscript(text=str(data["text"]),
                           duration_s=float(data["duration_s"]))


def segment_lookup(collection: VideoCollection, source_file: str,
                   start_s: float, end_s: float) -> LookupOutcome:
    """Bounds-check a sub-clip request against the collection's sources."""
    if source_file not in collection.source_durations:
        return LookupOutcome.UNKNOWN_FILE
    if not start_s < end_s:
        return LookupOutcome.INVERTED_RANGE
    if start_s < 0 or end_s > collection.source_durations[source_file] + 1e-9:
        return LookupOutcome.OUT_OF_BOUNDS
    return LookupOutcome.OK


def best_overlap_segment(collection: VideoCollection, source_file: str,
                         start_s: float, end_s: float) -> Optional[VideoSegment]:
    """Segment of source_file with maximal overlap with [start_s, end_s]."""
    best = None
    best_overlap = 0.0
    for segment in collection.segments:
        if segment.source_file != source_file:
            continue
        overlap = segment.overlap_with(start_s, end_s)
        if overlap > best_overlap:
            best = segment
            best_overlap = overlap
    return best


SUMMARY_INSTRUCTION = (
    "You are given the descriptions of the top-level segments of a video "
    "collection. Summarize the whole collection in a single paragraph, "
    "covering its subjects, settings and overall tone. Reply with the "
    "paragraph only."
)


def summarize_collection(collection: VideoCollection, gateway) -> str:
    """Produce the one-paragraph collection summary via the chat gateway.

    Only level-0 segment descriptions are shown to the model. The result
    is stored on the collection and returned.
    """
    level0 = collection.level0_segments()
    if not level0:
        raise EmptyCollection("collection has no top-level segments")
    listing = "\n".join(f"- {s.description}" for s in level0)
    messages = [
        {"role": "system", "content": SUMMARY_INSTRUCTION},
        {"role": "user", "content": listing},
    ]
    summary = gateway.complete(messages).strip()
    collection.summary = summary
    return summary
