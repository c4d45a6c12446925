"""Command-line surface tying the engine into reproducible workflows.

Exit codes are a stable contract: 0 success, 2 input error, 3 budget
exhausted, 4 episode failure, 5 gateway failure.
"""

from __future__ import annotations

import hashlib
import json
import os
import shlex
import subprocess
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import click

from . import demos as demos_mod
from . import evaluation
from .collection import (
    collection_to_dict,
    load_collection,
    load_transcript,
    summarize_collection,
)
from .errors import (
    BudgetExhausted,
    EditDuetError,
    GatewayError,
    SchemaError,
)
from .gateway import RemoteGateway, ScriptedGateway, record_replay
from .orchestrator import (
    EpisodeConfig,
    EpisodeStatus,
    FailureKind,
    run_episode,
)
from .protocol import UserRequest
from .search import HashEmbedder, HttpEmbedder
from .timeline import init_random, load_timeline, save_timeline

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_BUDGET = 3
EXIT_EPISODE = 4
EXIT_GATEWAY = 5

ENV_PREFIX = "EDITDUET_"


@dataclass
class Config:
    llm_base_url: Optional[str] = None
    llm_api_key: Optional[str] = None
    llm_model: Optional[str] = None
    judge_model: Optional[str] = None
    embed_base_url: Optional[str] = None
    seed: int = 0
    mode: str = "strict"

    @classmethod
    def from_env(cls) -> "Config":
        env = os.environ
        return cls(
            llm_base_url=env.get(ENV_PREFIX + "LLM_BASE_URL"),
            llm_api_key=env.get(ENV_PREFIX + "LLM_API_KEY"),
            llm_model=env.get(ENV_PREFIX + "LLM_MODEL"),
            judge_model=env.get(ENV_PREFIX + "JUDGE_MODEL"),
            embed_base_url=env.get(ENV_PREFIX + "EMBED_BASE_URL"),
            seed=int(env.get(ENV_PREFIX + "SEED", "0")),
        )

    def to_dict(self) -> dict:
        return {
            "llm_base_url": self.llm_base_url,
            "llm_model": self.llm_model,
            "judge_model": self.judge_model,
            "embed_base_url": self.embed_base_url,
            "seed": self.seed,
            "mode": self.mode,
        }


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out_dir: Path, command: str, config: Config,
                   inputs: list[Path], outputs: list[str], extra: dict):
    """Per-run manifest for auditability."""
    out_dir.mkdir(parents=True, exist_ok=True)
    config_hash = hashlib.sha256(
        json.dumps(config.to_dict(), sort_keys=True).encode()).hexdigest()
    manifest = {
        "command": command,
        "config_hash": config_hash,
        "input_hashes": {str(p): _sha256_file(p) for p in inputs
                         if p.exists()},
        "outputs": outputs,
        **extra,
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")


def make_gateway(config: Config, script: Optional[str],
                 record_dir: Optional[str], replay_dir: Optional[str]):
    if script:
        return ScriptedGateway.from_file(script)
    if replay_dir:
        return record_replay(replay_dir)
    if not (config.llm_base_url and config.llm_api_key and config.llm_model):
        raise click.UsageError(
            "networked commands need EDITDUET_LLM_BASE_URL, "
            "EDITDUET_LLM_API_KEY and EDITDUET_LLM_MODEL (or --script)")
    gateway = RemoteGateway(config.llm_base_url, config.llm_api_key,
                            config.llm_model)
    if record_dir:
        return record_replay(record_dir, inner=gateway)
    return gateway


def make_embedder(config: Config, collection):
    if config.embed_base_url:
        return HttpEmbedder(config.embed_base_url, config.llm_api_key)
    dim = collection.embedding_dim or 32
    return HashEmbedder(dim=dim, seed=config.seed)


def _common_options(fn):
    fn = click.option("--seed", type=int, default=None,
                      help="Override EDITDUET_SEED.")(fn)
    fn = click.option("--script", type=click.Path(exists=True), default=None,
                      help="Use a scripted gateway transcript (offline).")(fn)
    fn = click.option("--record-dir", type=click.Path(), default=None,
                      help="Record remote replies into this session dir.")(fn)
    fn = click.option("--replay-dir", type=click.Path(exists=True),
                      default=None,
                      help="Replay cached replies from this session dir.")(fn)
    return fn


def _load_config(seed: Optional[int]) -> Config:
    config = Config.from_env()
    if seed is not None:
        config.seed = seed
    return config


@click.group()
def main():
    """EditDuet: multi-agent non-linear B-roll editing."""


@main.command("ingest")
@click.argument("metadata_file", type=click.Path(exists=True))
@click.option("-o", "--output", type=click.Path(), default=None,
              help="Normalized metadata output path.")
@click.option("--summarize", is_flag=True,
              help="Also generate the collection summary via the gateway.")
@_common_options
def cmd_ingest(metadata_file, output, summarize, seed, script, record_dir,
               replay_dir):
    """Validate and normalize a collection metadata file."""
    config = _load_config(seed)
    try:
        collection = load_collection(metadata_file)
    except SchemaError as exc:
        click.echo(f"schema error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    if summarize:
        try:
            gateway = make_gateway(config, script, record_dir, replay_dir)
            summarize_collection(collection, gateway)
        except GatewayError as exc:
            click.echo(f"gateway error: {exc}", err=True)
            sys.exit(EXIT_GATEWAY)
    out = Path(output) if output else Path(metadata_file).with_suffix(
        ".normalized.json")
    out.write_text(json.dumps(collection_to_dict(collection), indent=2) + "\n",
                   encoding="utf-8")
    click.echo(f"{len(collection.segments)} segments "
               f"({collection.dropped_short} dropped as too short) -> {out}")


@main.command("explore")
@click.option("--collection", "collection_file", required=True,
              type=click.Path(exists=True))
@click.option("--aroll", "aroll_file", required=True,
              type=click.Path(exists=True))
@click.option("--stage", type=click.Choice(["editor", "critic", "both"]),
              default="both")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--budget", type=int, default=demos_mod.DEFAULT_ATTEMPT_BUDGET)
@click.option("--init-clips", type=int, default=demos_mod.DEFAULT_INIT_CLIPS)
@_common_options
def cmd_explore(collection_file, aroll_file, stage, out_dir, budget,
                init_clips, seed, script, record_dir, replay_dir):
    """Synthesize in-context demonstrations by exploration."""
    config = _load_config(seed)
    try:
        collection = load_collection(collection_file)
        aroll = load_transcript(aroll_file)
    except SchemaError as exc:
        click.echo(f"schema error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    gateway = make_gateway(config, script, record_dir, replay_dir)
    embedder = make_embedder(config, collection)
    episode_config = EpisodeConfig(seed=config.seed)
    out = Path(out_dir)
    try:
        editor_demos = []
        if stage in ("editor", "both"):
            editor_demos = demos_mod.synthesize_editor_demos(
                collection, aroll, gateway, episode_config, embedder,
                store_dir=out, budget=budget, init_clips=init_clips)
        else:
            editor_demos = demos_mod.load_demos(out, stage="editor")
        if stage in ("critic", "both"):
            demos_mod.synthesize_critic_demos(
                collection, aroll, editor_demos, gateway, episode_config,
                embedder, store_dir=out, budget=budget,
                init_clips=init_clips)
    except BudgetExhausted as exc:
        click.echo(f"budget exhausted: {exc}", err=True)
        sys.exit(EXIT_BUDGET)
    except GatewayError as exc:
        click.echo(f"gateway error: {exc}", err=True)
        sys.exit(EXIT_GATEWAY)
    write_manifest(out, "explore", config,
                   [Path(collection_file), Path(aroll_file)],
                   [str(p) for p in sorted(out.glob("*.json"))],
                   {"stage": stage})
    click.echo(f"demonstrations written to {out}")


@main.command("edit")
@click.option("--collection", "collection_file", required=True,
              type=click.Path(exists=True))
@click.option("--aroll", "aroll_file", required=True,
              type=click.Path(exists=True))
@click.option("--request", "request_text", required=True)
@click.option("--demos", "demos_dir", type=click.Path(exists=True),
              default=None)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--init-random", "init_n", type=int, default=None,
              help="Start from N random clips instead of an empty timeline.")
@click.option("--lenient", is_flag=True,
              help="Return mutation errors to the editor instead of failing.")
@click.option("--max-editor-steps", type=int, default=30)
@click.option("--max-critic-rounds", type=int, default=8)
@_common_options
def cmd_edit(collection_file, aroll_file, request_text, demos_dir, out_dir,
             init_n, lenient, max_editor_steps, max_critic_rounds, seed,
             script, record_dir, replay_dir):
    """Run one editor/critic episode and write the resulting timeline."""
    config = _load_config(seed)
    if lenient:
        config.mode = "lenient"
    try:
        collection = load_collection(collection_file)
        aroll = load_transcript(aroll_file)
        request = UserRequest(request_text)
    except (SchemaError, ValueError) as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    try:
        gateway = make_gateway(config, script, record_dir, replay_dir)
    except GatewayError as exc:
        click.echo(f"gateway error: {exc}", err=True)
        sys.exit(EXIT_GATEWAY)
    embedder = make_embedder(config, collection)
    editor_demos = critic_demos = []
    if demos_dir:
        editor_demos = demos_mod.load_demos(demos_dir, stage="editor")
        critic_demos = demos_mod.load_demos(demos_dir, stage="critic")
    episode_config = EpisodeConfig(
        max_editor_steps_per_round=max_editor_steps,
        max_critic_rounds=max_critic_rounds,
        strict_failures=not lenient,
        seed=config.seed)
    initial = (init_random(collection, init_n, config.seed)
               if init_n else None)
    out = Path(out_dir)
    try:
        result = run_episode(collection, aroll, request, editor_demos,
                             critic_demos, gateway, episode_config, embedder,
                             out_dir=out, initial_timeline=initial)
    except GatewayError as exc:
        click.echo(f"gateway error: {exc}", err=True)
        sys.exit(EXIT_GATEWAY)
    summary = {
        "status": result.status.value,
        "failure_kind": (result.failure_kind.value
                         if result.failure_kind else None),
        "critic_rounds": result.critic_rounds,
        "editor_steps": result.editor_steps,
        "duration_s": result.final_timeline.total_duration(),
    }
    (out / "result.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    write_manifest(out, "edit", config,
                   [Path(collection_file), Path(aroll_file)],
                   ["timeline.json", "episode.jsonl", "result.json"],
                   {"request": request_text})
    click.echo(json.dumps(summary, sort_keys=True))
    if result.status is EpisodeStatus.FAILED:
        if result.failure_kind is FailureKind.GATEWAY_FAILURE:
            sys.exit(EXIT_GATEWAY)
        sys.exit(EXIT_EPISODE)


@main.command("eval")
@click.argument("runs_dir", type=click.Path(exists=True))
@click.option("--targets", required=True,
              help="Comma-separated target durations, aligned with the "
                   "sorted run directories.")
@click.option("-o", "--output", type=click.Path(), default=None)
def cmd_eval(runs_dir, targets, output):
    """Aggregate metrics over a directory of episode run directories."""
    from .orchestrator import EpisodeResult

    run_dirs = sorted(p for p in Path(runs_dir).iterdir() if p.is_dir())
    try:
        target_list = [float(t) for t in targets.split(",") if t.strip()]
    except ValueError:
        click.echo("targets must be numbers", err=True)
        sys.exit(EXIT_INPUT)
    results = []
    try:
        for run in run_dirs:
            summary = json.loads(
                (run / "result.json").read_text(encoding="utf-8"))
            timeline, _ = load_timeline(run / "timeline.json")
            status = (EpisodeStatus.RENDERED
                      if summary["status"] == "rendered"
                      else EpisodeStatus.FAILED)
            results.append(EpisodeResult(
                final_timeline=timeline, status=status, failure_kind=None,
                critic_rounds=summary.get("critic_rounds", 0),
                editor_steps=summary.get("editor_steps", 0), log_ref=None))
        report = evaluation.aggregate(results, target_list)
    except (OSError, KeyError, json.JSONDecodeError, EditDuetError) as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    click.echo(f"{'episodes':>18}: {report.n_episodes}")
    click.echo(f"{'failure rate':>18}: {report.failure_rate:.3f}")
    coverage = ("n/a" if report.mean_time_coverage is None
                else f"{report.mean_time_coverage:.3f}")
    reps = ("n/a" if report.mean_repetitions is None
            else f"{report.mean_repetitions:.3f}")
    click.echo(f"{'mean time coverage':>18}: {coverage}")
    click.echo(f"{'mean repetitions':>18}: {reps}")
    if output:
        Path(output).write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8")


@main.command("judge")
@click.option("--request", "request_text", required=True)
@click.option("--timeline-a", required=True, type=click.Path(exists=True))
@click.option("--timeline-b", required=True, type=click.Path(exists=True))
@click.option("--collection", "collection_file", type=click.Path(exists=True),
              default=None)
@click.option("--media-root", type=click.Path(exists=True), default=None)
@click.option("--pair-id", default="pair-0")
@click.option("-o", "--output", type=click.Path(), default=None)
@_common_options
def cmd_judge(request_text, timeline_a, timeline_b, collection_file,
              media_root, pair_id, output, seed, script, record_dir,
              replay_dir):
    """Pairwise judge verdict between two timeline files."""
    config = _load_config(seed)
    try:
        tau1, _ = load_timeline(timeline_a)
        tau2, _ = load_timeline(timeline_b)
        request = UserRequest(request_text)
    except (SchemaError, ValueError) as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    gateway = make_gateway(config, script, record_dir, replay_dir)
    grids = None
    if collection_file and media_root:
        try:
            collection = load_collection(collection_file)
            grids = tuple(
                evaluation.build_keyframe_grid(
                    t, evaluation.resolve_keyframes(t, collection, media_root))
                for t in (tau1, tau2))
        except EditDuetError as exc:
            click.echo(f"input error: {exc}", err=True)
            sys.exit(EXIT_INPUT)
    try:
        verdict = evaluation.judge(request, tau1, tau2, gateway,
                                   pair_id=pair_id, seed=config.seed,
                                   grids=grids)
    except GatewayError as exc:
        click.echo(f"gateway error: {exc}", err=True)
        sys.exit(EXIT_GATEWAY)
    record = {"pair_id": verdict.pair_id, "preferred": verdict.preferred,
              "rationale": verdict.rationale}
    click.echo(json.dumps(record, sort_keys=True))
    if output:
        Path(output).write_text(json.dumps(record, indent=2, sort_keys=True)
                                + "\n", encoding="utf-8")


@main.command("pabak")
@click.argument("observed_agreement", type=float)
def cmd_pabak(observed_agreement):
    """Two-category PABAK for an observed agreement fraction."""
    try:
        value = evaluation.pabak(observed_agreement)
    except EditDuetError as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    click.echo(f"{value:.3f}")


@main.command("render-plan")
@click.argument("timeline_file", type=click.Path(exists=True))
@click.option("-o", "--output", type=click.Path(), default=None)
@click.option("--aroll-file", default=None,
              help="A-roll media whose audio is overlaid on the cut.")
@click.option("--media-root", type=click.Path(), default=".")
@click.option("--output-name", default="editduet_output.mp4")
@click.option("--exec", "execute", is_flag=True,
              help="Run the emitted media-tool commands.")
def cmd_render_plan(timeline_file, output, aroll_file, media_root,
                    output_name, execute):
    """Emit an ordered cut list and media-tool commands for a timeline."""
    try:
        timeline, _ = load_timeline(timeline_file)
    except SchemaError as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    if not timeline.clips:
        click.echo("nothing to render: timeline is empty", err=True)
        sys.exit(EXIT_INPUT)
    root = Path(media_root)
    plan = {
        "cuts": [{"source_file": c.source_file, "start_s": c.start_s,
                  "end_s": c.end_s} for c in timeline.clips],
        "aroll_file": aroll_file,
        "output_name": output_name,
    }
    commands = render_commands(plan, root)
    out = Path(output) if output else Path(timeline_file).with_suffix(
        ".renderplan.json")
    out.write_text(json.dumps({"plan": plan, "commands": commands},
                              indent=2) + "\n", encoding="utf-8")
    for command in commands:
        click.echo(command)
    if execute:
        missing = [str(root / c.source_file) for c in timeline.clips
                   if not (root / c.source_file).exists()]
        if aroll_file and not (root / aroll_file).exists():
            missing.append(str(root / aroll_file))
        if missing:
            click.echo("missing media: " + ", ".join(sorted(set(missing))),
                       err=True)
            sys.exit(EXIT_INPUT)
        for command in commands:
            subprocess.run(shlex.split(command), check=True)


def render_commands(plan: dict, media_root: Path) -> list[str]:
    """ffmpeg command sequence: trim each cut, concatenate, and overlay
    the A-roll audio when given."""
    commands = []
    list_lines = []
    for i, cut in enumerate(plan["cuts"]):
        src = media_root / cut["source_file"]
        commands.append(
            f"ffmpeg -y -ss {cut['start_s']:.3f} -to {cut['end_s']:.3f} "
            f"-i {shlex.quote(str(src))} -c:v libx264 -an cut_{i:03d}.mp4")
        list_lines.append(f"file 'cut_{i:03d}.mp4'")
    commands.append("printf '" + "\\n".join(list_lines)
                    + "\\n' > concat_list.txt")
    concat_out = ("broll_concat.mp4" if plan["aroll_file"]
                  else plan["output_name"])
    commands.append(f"ffmpeg -y -f concat -safe 0 -i concat_list.txt -c copy "
                    f"{shlex.quote(concat_out)}")
    if plan["aroll_file"]:
        aroll = media_root / plan["aroll_file"]
        commands.append(
            f"ffmpeg -y -i {shlex.quote(concat_out)} "
            f"-i {shlex.quote(str(aroll))} -map 0:v -map 1:a -shortest "
            f"{shlex.quote(plan['output_name'])}")
    return commands


if __name__ == "__main__":
    main()
