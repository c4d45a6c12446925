"""Metadata emission in the exact schema the editing engine ingests."""

from __future__ import annotations

import json
from pathlib import Path

from .annotate import CAMERA_MOTIONS, SHOT_TYPES, SegmentRecord
from .errors import SchemaError


def records_to_metadata(records: list[SegmentRecord],
                        source_durations: dict[str, float],
                        name: str = "collection") -> dict:
    dims = {len(r.embedding) for r in records}
    if len(dims) > 1:
        raise SchemaError(f"mixed embedding dimensions: {sorted(dims)}")
    segments = []
    for record in records:
        if record.shot_type not in SHOT_TYPES:
            raise SchemaError(f"shot type {record.shot_type!r} not allowed")
        if record.camera_motion not in CAMERA_MOTIONS:
            raise SchemaError(
                f"camera motion {record.camera_motion!r} not allowed")
        if record.source_file not in source_durations:
            raise SchemaError(f"unknown source {record.source_file!r}")
        segments.append({
            "file": record.source_file,
            "start_s": record.start_s,
            "duration_s": record.duration_s,
            "level": record.level,
            "description": record.description,
            "shot_type": record.shot_type,
            "camera_motion": record.camera_motion,
            "embedding": record.embedding,
            "keyframe": record.keyframe,
        })
    return {
        "name": name,
        "sources": [{"file": f, "duration_s": d}
                    for f, d in sorted(source_durations.items())],
        "summary": None,
        "segments": segments,
    }


def emit_metadata(records: list[SegmentRecord],
                  source_durations: dict[str, float],
                  out_path: str | Path, name: str = "collection") -> Path:
    metadata = records_to_metadata(records, source_durations, name=name)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(metadata, indent=2, sort_keys=True) + "\n",
                   encoding="utf-8")
    return out
