"""Two-stage exploration that synthesizes in-context demonstrations.

Stage one manufactures editor demonstrations: an explorer takes actions
on a randomly initialized timeline, a labeler guesses the feedback that
could have produced the change, and a scorer rates the pair 1-5. Scores
of 4 get one self-reflection pass and a re-score; only 5s are kept.
Stage two runs full episodes with the real editor (armed with the five
stage-one demos) and an exploring critic, labels each rendered episode
with a guessed user request, and again keeps only 5-scored examples.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .collection import ArollTranscript, VideoCollection
from .errors import BudgetExhausted, GatewayError, UnparseableScore
from .gateway import ChatGateway
from .orchestrator import (
    Environment,
    EpisodeConfig,
    EpisodeFailure,
    EpisodeLog,
    EpisodeStatus,
    ROLE_TEMPERATURE,
    run_editor_round,
    run_episode,
)
from .protocol import (
    GiveFeedback,
    History,
    ParseFailure,
    assemble_prompt,
    parse_action,
    serialize_action,
)
from .search import TextEmbedder
from .timeline import Timeline, init_random, render_view

logger = logging.getLogger(__name__)

DEMOS_REQUIRED = 5
DEFAULT_ATTEMPT_BUDGET = 100
DEFAULT_INIT_CLIPS = 3

_SCORE_RE = re.compile(r"(?<!\d)([1-5])(?!\d)")


@dataclass
class Demonstration:
    stage: str  # "editor" | "critic"
    label: str
    trajectory: History
    initial_view: str
    final_view: str
    score: int
    reflected: bool = False

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "label": self.label,
            "score": self.score,
            "reflected": self.reflected,
            "initial_view": self.initial_view,
            "final_view": self.final_view,
            "trajectory": [json.loads(serialize_action(a))
                           for a in self.trajectory.actions()],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Demonstration":
        stage = data["stage"]
        role = "editor" if stage == "editor" else "critic"
        history = History(owner=role)
        from .protocol import Observation

        empty = Observation(o_a="", o_v="", o_search=(), tau_view="")
        for raw in data["trajectory"]:
            action = parse_action(json.dumps(raw), role)
            if isinstance(action, ParseFailure):
                raise ValueError(f"bad stored action: {action.message}")
            history.append(empty, action)
        return cls(
            stage=stage,
            label=data["label"],
            trajectory=history,
            initial_view=data["initial_view"],
            final_view=data["final_view"],
            score=int(data["score"]),
            reflected=bool(data.get("reflected", False)),
        )


def save_demo(demo: Demonstration, store_dir: str | Path, index: int) -> Path:
    store = Path(store_dir)
    store.mkdir(parents=True, exist_ok=True)
    path = store / f"{demo.stage}_{index:03d}.json"
    path.write_text(json.dumps(demo.to_dict(), indent=2) + "\n",
                    encoding="utf-8")
    return path


def load_demos(store_dir: str | Path,
               stage: Optional[str] = None) -> list[Demonstration]:
    store = Path(store_dir)
    demos = []
    for path in sorted(store.glob("*.json")):
        if path.name == "stats.json":
            continue
        data = json.loads(path.read_text(encoding="utf-8"))
        if stage is not None and data.get("stage") != stage:
            continue
        demos.append(Demonstration.from_dict(data))
    return demos


def trajectory_view(history: History, final_view: str) -> str:
    """Action list interleaved with the timeline state after each step."""
    if not history.steps:
        return "(no actions taken)"
    lines = []
    for i, (observation, action) in enumerate(history.steps):
        lines.append(f"step {i}: {serialize_action(action)}")
        after = (history.steps[i + 1][0].tau_view
                 if i + 1 < len(history.steps) else final_view)
        lines.append(f"timeline after step {i}:\n{after}")
    return "\n".join(lines)


def extract_score(reply: str) -> int:
    """Last standalone digit 1-5 in the scorer's reply."""
    matches = _SCORE_RE.findall(reply)
    if not matches:
        raise UnparseableScore(f"no score digit in reply: {reply[:80]!r}")
    return int(matches[-1])


def explore_editor(env: Environment, gateway: ChatGateway,
                   config: EpisodeConfig) -> Optional[History]:
    """One exploration run; returns the trajectory or None on failure."""
    history = History(owner="editor")
    log = EpisodeLog(None)
    try:
        run_editor_round(env, "", [], gateway, config, history, log,
                         role="editor_explorer")
    except EpisodeFailure as exc:
        logger.info("explorer attempt discarded: %s", exc)
        return None
    return history


def label_editor(initial_view: str, final_view: str,
                 gateway: ChatGateway) -> str:
    messages = assemble_prompt("editor_labeler", [], {
        "initial_view": initial_view,
        "final_view": final_view,
    })
    return gateway.complete(messages,
                            temperature=ROLE_TEMPERATURE["editor_labeler"])


def score_editor(initial_view: str, trajectory: History, final_view: str,
                 label: str, gateway: ChatGateway) -> int:
    messages = assemble_prompt("editor_scorer", [], {
        "initial_view": initial_view,
        "trajectory_view": trajectory_view(trajectory, final_view),
        "final_view": final_view,
        "label": label,
    })
    reply = gateway.complete(messages,
                             temperature=ROLE_TEMPERATURE["editor_scorer"])
    return extract_score(reply)


def reflect_editor(env: Environment, label: str, gateway: ChatGateway,
                   config: EpisodeConfig) -> Optional[History]:
    """One refinement pass: re-run the editor from the initial state with
    the synthetic label as feedback, producing a revised trajectory."""
    history = History(owner="editor")
    log = EpisodeLog(None)
    try:
        run_editor_round(env, label, [], gateway, config, history, log,
                         role="editor")
    except EpisodeFailure as exc:
        logger.info("reflection discarded: %s", exc)
        return None
    return history


def _write_stats(store_dir: Optional[str | Path], stage: str, attempts: int,
                 kept: int):
    if store_dir is None:
        return
    store = Path(store_dir)
    store.mkdir(parents=True, exist_ok=True)
    stats_path = store / "stats.json"
    stats = {}
    if stats_path.exists():
        stats = json.loads(stats_path.read_text(encoding="utf-8"))
    stats[stage] = {"attempts": attempts, "kept": kept}
    stats_path.write_text(json.dumps(stats, indent=2) + "\n", encoding="utf-8")


def synthesize_editor_demos(collection: VideoCollection,
                            aroll: ArollTranscript, gateway: ChatGateway,
                            config: EpisodeConfig, embedder: TextEmbedder,
                            store_dir: Optional[str | Path] = None,
                            budget: int = DEFAULT_ATTEMPT_BUDGET,
                            init_clips: int = DEFAULT_INIT_CLIPS,
                            ) -> list[Demonstration]:
    """Stage one: explore, label, score (reflect once on a 4) until five
    5-scored editor demonstrations are collected."""
    kept: list[Demonstration] = []
    attempts = 0
    while len(kept) < DEMOS_REQUIRED and attempts < budget:
        attempts += 1
        initial = init_random(collection, init_clips,
                              seed=config.seed + attempts)
        env = Environment(collection=collection, aroll=aroll,
                          embedder=embedder, timeline=initial.snapshot())
        initial_view = render_view(initial, "editor")
        trajectory = explore_editor(env, gateway, config)
        if trajectory is None:
            continue
        final_view = render_view(env.timeline, "editor")
        try:
            label = label_editor(initial_view, final_view, gateway)
            score = score_editor(initial_view, trajectory, final_view, label,
                                 gateway)
        except (UnparseableScore, GatewayError) as exc:
            logger.info("attempt %d discarded: %s", attempts, exc)
            continue
        reflected = False
        if score == 4:
            env = Environment(collection=collection, aroll=aroll,
                              embedder=embedder, timeline=initial.snapshot())
            revised = reflect_editor(env, label, gateway, config)
            if revised is None:
                continue
            trajectory = revised
            final_view = render_view(env.timeline, "editor")
            reflected = True
            try:
                score = score_editor(initial_view, trajectory, final_view,
                                     label, gateway)
            except (UnparseableScore, GatewayError) as exc:
                logger.info("attempt %d discarded on re-score: %s",
                            attempts, exc)
                continue
        if score != 5:
            continue
        demo = Demonstration(stage="editor", label=label.strip(),
                             trajectory=trajectory,
                             initial_view=initial_view, final_view=final_view,
                             score=score, reflected=reflected)
        if store_dir is not None:
            save_demo(demo, store_dir, len(kept))
        kept.append(demo)
    _write_stats(store_dir, "editor", attempts, len(kept))
    if len(kept) < DEMOS_REQUIRED:
        raise BudgetExhausted(
            f"collected {len(kept)}/{DEMOS_REQUIRED} editor demos "
            f"in {attempts} attempts")
    return kept


def label_critic(initial_view: str, feedback_history: list[str],
                 final_view: str, gateway: ChatGateway) -> str:
    messages = assemble_prompt("critic_labeler", [], {
        "initial_view": initial_view,
        "feedback_history": feedback_history,
        "final_view": final_view,
    })
    return gateway.complete(messages,
                            temperature=ROLE_TEMPERATURE["critic_labeler"])


def score_critic(label: str, final_view: str, gateway: ChatGateway) -> int:
    messages = assemble_prompt("critic_scorer", [], {
        "label": label,
        "final_view": final_view,
    })
    reply = gateway.complete(messages,
                             temperature=ROLE_TEMPERATURE["critic_scorer"])
    return extract_score(reply)


def synthesize_critic_demos(collection: VideoCollection,
                            aroll: ArollTranscript,
                            editor_demos: list[Demonstration],
                            gateway: ChatGateway, config: EpisodeConfig,
                            embedder: TextEmbedder,
                            store_dir: Optional[str | Path] = None,
                            budget: int = DEFAULT_ATTEMPT_BUDGET,
                            init_clips: int = DEFAULT_INIT_CLIPS,
                            allow_fewer: bool = False,
                            ) -> list[Demonstration]:
    """Stage two: full episodes with the demo-armed editor and an
    exploring critic; rendered episodes are labeled with a guessed user
    request and kept only when the scorer replies 5."""
    if len(editor_demos) < DEMOS_REQUIRED and not allow_fewer:
        raise ValueError(
            f"critic stage needs {DEMOS_REQUIRED} editor demos, "
            f"got {len(editor_demos)}")
    example_labels = [d.label for d in editor_demos[:DEMOS_REQUIRED]]
    kept: list[Demonstration] = []
    attempts = 0
    while len(kept) < DEMOS_REQUIRED and attempts < budget:
        attempts += 1
        initial = init_random(collection, init_clips,
                              seed=config.seed + 10_000 + attempts)
        initial_view = render_view(initial, "critic")
        result = run_episode(collection, aroll, None, editor_demos, [],
                             gateway, config, embedder,
                             initial_timeline=initial.snapshot(),
                             critic_role="critic_explorer",
                             example_labels=example_labels)
        if result.status is not EpisodeStatus.RENDERED:
            logger.info("critic attempt %d discarded: %s", attempts,
                        result.failure_kind)
            continue
        final_view = render_view(result.final_timeline, "critic")
        feedbacks = [a.f for a in result.critic_history.actions()
                     if isinstance(a, GiveFeedback)]
        try:
            label = label_critic(initial_view, feedbacks, final_view, gateway)
            score = score_critic(label, final_view, gateway)
        except (UnparseableScore, GatewayError) as exc:
            logger.info("critic attempt %d discarded: %s", attempts, exc)
            continue
        if score != 5:
            continue
        demo = Demonstration(stage="critic", label=label.strip(),
                             trajectory=result.critic_history,
                             initial_view=initial_view, final_view=final_view,
                             score=score)
        if store_dir is not None:
            save_demo(demo, store_dir, len(kept))
        kept.append(demo)
    _write_stats(store_dir, "critic", attempts, len(kept))
    if len(kept) < DEMOS_REQUIRED:
        raise BudgetExhausted(
            f"collected {len(kept)}/{DEMOS_REQUIRED} critic demos "
            f"in {attempts} attempts")
    return kept
