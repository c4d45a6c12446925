"""Offline media preprocessing adapter for the editing engine."""

from .annotate import (
    CAMERA_MOTIONS,
    SHOT_TYPES,
    SegmentRecord,
    StubCaptioner,
    StubClassifier,
    annotate_segments,
    embed_text,
    sample_frames,
    snap_to_vocabulary,
    write_midpoint_keyframe,
)
from .config import AdapterConfig
from .emit import emit_metadata, records_to_metadata
from .errors import AdapterError, DecodeError, ModelError, SchemaError
from .segmenter import (
    MIN_SEGMENT_SECONDS,
    SegmentBoundary,
    extract_segments,
    probe_duration,
    uniform_boundaries,
)

__all__ = [
    "AdapterConfig",
    "AdapterError",
    "CAMERA_MOTIONS",
    "DecodeError",
    "MIN_SEGMENT_SECONDS",
    "ModelError",
    "SHOT_TYPES",
    "SchemaError",
    "SegmentBoundary",
    "SegmentRecord",
    "StubCaptioner",
    "StubClassifier",
    "annotate_segments",
    "embed_text",
    "emit_metadata",
    "extract_segments",
    "probe_duration",
    "records_to_metadata",
    "sample_frames",
    "snap_to_vocabulary",
    "uniform_boundaries",
    "write_midpoint_keyframe",
]
