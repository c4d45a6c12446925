import json

import pytest
from click.testing import CliRunner

from editduet.cli import main
from editduet.timeline import Timeline, TimelineClip, save_timeline

from conftest import tool


@pytest.fixture
def runner():
    return CliRunner()


def segment_dict(file="oven.mp4", start_s=0.0, duration_s=4.0,
                 description="a clip", shot_type="medium",
                 camera_motion="static", embedding=(1.0, 0.0)):
    return {"file": file, "start_s": start_s, "duration_s": duration_s,
            "level": 0, "description": description, "shot_type": shot_type,
            "camera_motion": camera_motion, "embedding": list(embedding),
            "keyframe": None}


def write_inputs(tmp_path):
    metadata = {
        "name": "bakery",
        "sources": [{"file": "oven.mp4", "duration_s": 60.0},
                    {"file": "dough.mp4", "duration_s": 30.0}],
        "summary": "A bakery.",
        "segments": [
            segment_dict("oven.mp4", 0.0, 10.0),
            segment_dict("oven.mp4", 20.0, 8.0, embedding=(0.8, 0.6)),
            segment_dict("dough.mp4", 0.0, 6.0, embedding=(0.0, 1.0)),
            segment_dict("dough.mp4", 10.0, 5.0, embedding=(0.5, 0.5)),
        ],
    }
    collection_path = tmp_path / "collection.json"
    collection_path.write_text(json.dumps(metadata), encoding="utf-8")
    aroll_path = tmp_path / "aroll.json"
    aroll_path.write_text(
        json.dumps({"text": "We bake bread.", "duration_s": 18.0}),
        encoding="utf-8")
    return collection_path, aroll_path


def write_script(tmp_path, replies, name="script.json"):
    path = tmp_path / name
    path.write_text(json.dumps([{"reply": r} for r in replies]),
                    encoding="utf-8")
    return path


GOOD_EPISODE = [
    tool("give_feedback", f="open with the oven"),
    tool("add_to_timeline", v="oven.mp4", k=0, t_s=0.0, t_e=4.0),
    tool("DONE"),
    tool("RENDER"),
]


class TestIngest:
    def test_ok(self, runner, tmp_path):
        collection_path, _ = write_inputs(tmp_path)
        out = tmp_path / "normalized.json"
        result = runner.invoke(main, ["ingest", str(collection_path),
                                      "-o", str(out)])
        assert result.exit_code == 0, result.output
        assert "4 segments" in result.output
        assert json.loads(out.read_text())["name"] == "bakery"

    def test_schema_error_exits_2(self, runner, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json", encoding="utf-8")
        result = runner.invoke(main, ["ingest", str(bad)])
        assert result.exit_code == 2

    def test_summarize_with_script(self, runner, tmp_path):
        collection_path, _ = write_inputs(tmp_path)
        script = write_script(tmp_path, ["A bakery film."])
        out = tmp_path / "normalized.json"
        result = runner.invoke(main, ["ingest", str(collection_path),
                                      "-o", str(out),
                                      "--summarize", "--script", str(script)])
        assert result.exit_code == 0, result.output
        assert json.loads(out.read_text())["summary"] == "A bakery film."


class TestEdit:
    def invoke(self, runner, tmp_path, replies, extra=()):
        collection_path, aroll_path = write_inputs(tmp_path)
        script = write_script(tmp_path, replies)
        out = tmp_path / "run"
        args = ["edit", "--collection", str(collection_path),
                "--aroll", str(aroll_path),
                "--request", "a short montage",
                "--out", str(out), "--script", str(script), *extra]
        return runner.invoke(main, args), out

    def test_rendered_episode(self, runner, tmp_path):
        result, out = self.invoke(runner, tmp_path, GOOD_EPISODE)
        assert result.exit_code == 0, result.output
        for name in ("timeline.json", "episode.jsonl", "result.json",
                     "manifest.json"):
            assert (out / name).exists()
        summary = json.loads((out / "result.json").read_text())
        assert summary["status"] == "rendered"
        assert summary["duration_s"] == pytest.approx(4.0)

    def test_episode_failure_exits_4(self, runner, tmp_path):
        replies = [tool("give_feedback", f="go"),
                   tool("remove_from_timeline", k=5)]
        result, out = self.invoke(runner, tmp_path, replies)
        assert result.exit_code == 4
        summary = json.loads((out / "result.json").read_text())
        assert summary["failure_kind"] == "index_error"

    def test_gateway_exhaustion_exits_5(self, runner, tmp_path):
        result, _ = self.invoke(runner, tmp_path, [])
        assert result.exit_code == 5

    def test_lenient_recovers(self, runner, tmp_path):
        replies = [tool("give_feedback", f="go"),
                   tool("remove_from_timeline", k=5),
                   tool("DONE"),
                   tool("RENDER")]
        result, _ = self.invoke(runner, tmp_path, replies,
                                extra=["--lenient"])
        assert result.exit_code == 0, result.output

    def test_missing_request_is_input_error(self, runner, tmp_path):
        collection_path, aroll_path = write_inputs(tmp_path)
        script = write_script(tmp_path, GOOD_EPISODE)
        result = runner.invoke(main, [
            "edit", "--collection", str(collection_path),
            "--aroll", str(aroll_path), "--request", "  ",
            "--out", str(tmp_path / "run"), "--script", str(script)])
        assert result.exit_code == 2


def explore_replies():
    attempt = [tool("DONE"), "tighten the pacing", "5"]
    return attempt * 5


class TestExplore:
    def test_editor_stage(self, runner, tmp_path):
        collection_path, aroll_path = write_inputs(tmp_path)
        script = write_script(tmp_path, explore_replies())
        out = tmp_path / "demos"
        result = runner.invoke(main, [
            "explore", "--collection", str(collection_path),
            "--aroll", str(aroll_path), "--stage", "editor",
            "--out", str(out), "--script", str(script)])
        assert result.exit_code == 0, result.output
        assert len(list(out.glob("editor_*.json"))) == 5
        stats = json.loads((out / "stats.json").read_text())
        assert stats["editor"]["kept"] == 5

    def test_budget_exhausted_exits_3(self, runner, tmp_path):
        collection_path, aroll_path = write_inputs(tmp_path)
        script = write_script(tmp_path,
                              [tool("DONE"), "weak label", "2"] * 3)
        result = runner.invoke(main, [
            "explore", "--collection", str(collection_path),
            "--aroll", str(aroll_path), "--stage", "editor",
            "--out", str(tmp_path / "demos"), "--script", str(script),
            "--budget", "3"])
        assert result.exit_code == 3


class TestEval:
    def test_aggregates_runs(self, runner, tmp_path):
        collection_path, aroll_path = write_inputs(tmp_path)
        for i, replies in enumerate([GOOD_EPISODE,
                                     [tool("give_feedback", f="go"),
                                      tool("remove_from_timeline", k=5)]]):
            script = write_script(tmp_path, replies, name=f"s{i}.json")
            runner.invoke(main, [
                "edit", "--collection", str(collection_path),
                "--aroll", str(aroll_path), "--request", "a montage",
                "--out", str(tmp_path / "runs" / f"run{i}"),
                "--script", str(script)])
        report_path = tmp_path / "report.json"
        result = runner.invoke(main, ["eval", str(tmp_path / "runs"),
                                      "--targets", "4.0,18.0",
                                      "-o", str(report_path)])
        assert result.exit_code == 0, result.output
        report = json.loads(report_path.read_text())
        assert report["failure_rate"] == pytest.approx(0.5)
        assert report["mean_time_coverage"] == pytest.approx(1.0)

    def test_bad_targets(self, runner, tmp_path):
        (tmp_path / "runs").mkdir()
        result = runner.invoke(main, ["eval", str(tmp_path / "runs"),
                                      "--targets", "abc"])
        assert result.exit_code == 2


def write_timeline(path, clips, request="a montage"):
    save_timeline(Timeline(clips), path, request=request)


def clip(source="oven.mp4", start=0.0, end=4.0):
    return TimelineClip(source_file=source, start_s=start, end_s=end,
                        description="d", shot_type="medium",
                        camera_motion="static")


class TestJudge:
    def test_verdict(self, runner, tmp_path):
        write_timeline(tmp_path / "a.json", [clip(end=18.0)])
        write_timeline(tmp_path / "b.json", [clip(end=3.0)])
        script = write_script(tmp_path, ["reasoning...\nA"])
        result = runner.invoke(main, [
            "judge", "--request", "an 18s montage",
            "--timeline-a", str(tmp_path / "a.json"),
            "--timeline-b", str(tmp_path / "b.json"),
            "--script", str(script)])
        assert result.exit_code == 0, result.output
        verdict = json.loads(result.output.strip().splitlines()[-1])
        assert verdict["preferred"] in ("A", "B")


class TestPabak:
    def test_published_value(self, runner):
        result = runner.invoke(main, ["pabak", "0.806"])
        assert result.exit_code == 0
        assert result.output.strip() == "0.612"

    def test_out_of_range(self, runner):
        result = runner.invoke(main, ["pabak", "1.5"])
        assert result.exit_code == 2


class TestRenderPlan:
    def test_commands_emitted(self, runner, tmp_path):
        path = tmp_path / "timeline.json"
        write_timeline(path, [clip(start=1.0, end=5.0),
                              clip(source="dough.mp4", start=0.0, end=3.0)])
        out = tmp_path / "plan.json"
        result = runner.invoke(main, ["render-plan", str(path),
                                      "-o", str(out)])
        assert result.exit_code == 0, result.output
        plan = json.loads(out.read_text())
        assert len(plan["plan"]["cuts"]) == 2
        assert any("concat" in c for c in plan["commands"])
        assert all(c.startswith(("ffmpeg", "printf"))
                   for c in plan["commands"])

    def test_empty_timeline_exits_2(self, runner, tmp_path):
        path = tmp_path / "timeline.json"
        write_timeline(path, [])
        result = runner.invoke(main, ["render-plan", str(path)])
        assert result.exit_code == 2
        assert "nothing to render" in result.output

    def test_exec_missing_media_exits_2(self, runner, tmp_path):
        path = tmp_path / "timeline.json"
        write_timeline(path, [clip()])
        result = runner.invoke(main, ["render-plan", str(path),
                                      "--media-root", str(tmp_path),
                                      "--exec"])
        assert result.exit_code == 2
        assert "missing media" in result.output
