import hashlib
import json
import shutil
import time
from importlib import resources
from pathlib import Path

import cv2
import numpy as np
import pytest
from click.testing import CliRunner

from preproc_adapter import (
    AdapterConfig,
    CAMERA_MOTIONS,
    SHOT_TYPES,
    SchemaError,
    annotate_segments,
    emit_metadata,
    extract_segments,
    probe_duration,
    sample_frames,
    snap_to_vocabulary,
    uniform_boundaries,
)
from preproc_adapter.cli import main as cli_main


@pytest.fixture
def media_dir(tmp_path):
    sample = resources.files("preproc_adapter") / "data" / "sample.mp4"
    media = tmp_path / "media"
    media.mkdir()
    with resources.as_file(sample) as path:
        shutil.copy(path, media / "sample.mp4")
    return media


def run_pipeline(media, out_path, seed=0):
    config = AdapterConfig(media_dir=str(media), output_path=str(out_path),
                           seed=seed)
    boundaries, durations, warnings = extract_segments(
        media, window_s=config.window_s, depth=config.depth)
    records = annotate_segments(boundaries, config)
    emit_metadata(records, durations, out_path, name="sample")
    return config, records, warnings


class TestSegmentation:
    def test_sixty_seconds_fallback(self):
        boundaries = uniform_boundaries("x.mp4", 60.0, 4.0, depth=1)
        assert len(boundaries) == 15
        assert all(b.duration_s == 4.0 and b.level == 0 for b in boundaries)

    def test_short_tail_dropped(self):
        boundaries = uniform_boundaries("x.mp4", 4.5, 4.0, depth=1)
        assert [(b.start_s, b.duration_s) for b in boundaries] == [(0.0, 4.0)]

    def test_long_tail_kept(self):
        boundaries = uniform_boundaries("x.mp4", 10.0, 4.0, depth=1)
        assert [(b.start_s, b.duration_s) for b in boundaries] == \
            [(0.0, 4.0), (4.0, 4.0), (8.0, 2.0)]

    def test_deeper_levels_halve_the_window(self):
        boundaries = uniform_boundaries("x.mp4", 8.0, 4.0, depth=2)
        level1 = [b for b in boundaries if b.level == 1]
        assert [(b.start_s, b.duration_s) for b in level1] == \
            [(0.0, 2.0), (2.0, 2.0), (4.0, 2.0), (6.0, 2.0)]

    def test_unreadable_file_skipped_with_warning(self, media_dir):
        (media_dir / "junk.mp4").write_bytes(b"not a video")
        boundaries, durations, warnings = extract_segments(media_dir)
        assert list(durations) == ["sample.mp4"]
        assert len(warnings) == 1 and "junk.mp4" in warnings[0]
        assert boundaries

    def test_probe_duration(self, media_dir):
        assert probe_duration(media_dir / "sample.mp4") == pytest.approx(10.0)


class TestAnnotation:
    def test_exactly_sixteen_frames_sampled(self, media_dir):
        frames = sample_frames(media_dir / "sample.mp4", 0.0, 4.0, 16)
        assert frames.shape[0] == 16

    def test_snap_in_vocabulary(self):
        assert snap_to_vocabulary("close-up", SHOT_TYPES) == \
            ("close-up", False)

    def test_snap_out_of_vocabulary(self):
        label, remapped = snap_to_vocabulary("closeup shot", SHOT_TYPES)
        assert label in SHOT_TYPES
        assert remapped

    def test_out_of_vocab_classifier_is_flagged(self, media_dir, tmp_path):
        class WideClassifier:
            def classify(self, frames, boundary):
                return "wide", "orbit"

        config = AdapterConfig(media_dir=str(media_dir),
                               output_path=str(tmp_path / "m.json"))
        boundaries, _, _ = extract_segments(media_dir, depth=1)
        records = annotate_segments(boundaries, config,
                                    classifier=WideClassifier())
        for record in records:
            assert record.shot_type in SHOT_TYPES
            assert record.camera_motion in CAMERA_MOTIONS
            assert any("remapped" in f for f in record.flags)

    def test_keyframes_are_midpoint_frames(self, media_dir, tmp_path):
        config = AdapterConfig(media_dir=str(media_dir),
                               output_path=str(tmp_path / "m.json"))
        boundaries, _, _ = extract_segments(media_dir, depth=1)
        records = annotate_segments(boundaries, config)
        capture = cv2.VideoCapture(str(media_dir / "sample.mp4"))
        fps = capture.get(cv2.CAP_PROP_FPS)
        for boundary, record in zip(boundaries, records):
            midpoint = boundary.start_s + boundary.duration_s / 2
            capture.set(cv2.CAP_PROP_POS_FRAMES, int(midpoint * fps))
            ok, expected = capture.read()
            assert ok
            written = cv2.imread(str(Path(config.keyframes_dir)
                                     / record.keyframe))
            assert np.array_equal(written, expected)
        capture.release()


class TestEmit:
    def test_mixed_embedding_dims_rejected(self, media_dir, tmp_path):
        config = AdapterConfig(media_dir=str(media_dir),
                               output_path=str(tmp_path / "m.json"))
        boundaries, durations, _ = extract_segments(media_dir, depth=1)
        records = annotate_segments(boundaries, config)
        records[0].embedding = records[0].embedding + [0.0]
        with pytest.raises(SchemaError):
            emit_metadata(records, durations, tmp_path / "m.json")

    def test_deterministic_output_hash(self, media_dir, tmp_path):
        hashes = []
        for run in ("a", "b"):
            out = tmp_path / run / "metadata.json"
            run_pipeline(media_dir, out, seed=3)
            hashes.append(hashlib.sha256(out.read_bytes()).hexdigest())
        assert hashes[0] == hashes[1]

    def test_source_and_segment_counts(self, media_dir, tmp_path):
        out = tmp_path / "metadata.json"
        _, records, _ = run_pipeline(media_dir, out)
        data = json.loads(out.read_text())
        assert len(data["sources"]) == 1
        assert len(data["segments"]) == len(records)


def test_round_trip_through_engine(media_dir, tmp_path):
    """Bundled 10 s sample, fallback segmentation, stub captioner: the
    emitted metadata must ingest cleanly into the editing engine."""
    from editduet.collection import load_collection

    start = time.perf_counter()
    out = tmp_path / "metadata.json"
    config, records, warnings = run_pipeline(media_dir, out)
    assert warnings == []

    collection = load_collection(out)
    assert collection.dropped_short == 0
    assert collection.segments
    assert len(collection.segments) == len(records)
    for segment in collection.segments:
        assert segment.duration_s >= 1.0
        assert segment.shot_type in SHOT_TYPES
        assert segment.camera_motion in CAMERA_MOTIONS
        assert segment.keyframe_ref is not None
        assert (Path(config.keyframes_dir) / segment.keyframe_ref).exists()
    assert time.perf_counter() - start < 60.0


def test_cli_round_trip(media_dir, tmp_path):
    config_path = tmp_path / "config.json"
    out = tmp_path / "metadata.json"
    config_path.write_text(json.dumps({
        "media_dir": str(media_dir),
        "output_path": str(out),
    }), encoding="utf-8")
    result = CliRunner().invoke(cli_main, ["--config", str(config_path),
                                           "--name", "sample"])
    assert result.exit_code == 0, result.output
    from editduet.collection import load_collection

    collection = load_collection(out)
    assert collection.name == "sample"
