"""The editor/critic refinement loop.

An episode alternates critic and editor rounds over a shared timeline:
the critic inspects the timeline against the user request and either
gives feedback or signals a render; the editor executes tool calls
until it declares the feedback satisfied. Failures are classified into
a fixed taxonomy and every event is written to a JSON-lines log.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

from .collection import ArollTranscript, VideoCollection
from .errors import (
    BadIndex,
    EmbedderError,
    GatewayError,
    InvertedRange,
    OutOfBounds,
    UnknownFile,
)
from .gateway import ChatGateway
from .protocol import (
    Action,
    AddToTimeline,
    Done,
    GiveFeedback,
    History,
    MoveClip,
    Observation,
    ParseFailure,
    ParseFailureKind,
    RemoveFromTimeline,
    Render,
    SearchCollection,
    SwitchClipPositions,
    action_schema,
    assemble_prompt,
    render_search_view,
    serialize_action,
    serialize_history,
)
from .search import SearchResult, TextEmbedder, search_collection
from .timeline import Timeline, render_view, save_timeline

# Additional decode attempts after a parse failure, with the failure
# appended as a corrective message.
PARSE_RETRIES = 2

ROLE_TEMPERATURE = {
    "editor": 0.0,
    "critic": 0.0,
    "editor_explorer": 0.7,
    "critic_explorer": 0.7,
    "editor_labeler": 0.0,
    "editor_scorer": 0.0,
    "critic_labeler": 0.0,
    "critic_scorer": 0.0,
}


@dataclass
class EpisodeConfig:
    max_editor_steps_per_round: int = 30
    max_critic_rounds: int = 8
    strict_failures: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.max_editor_steps_per_round < 1 or self.max_critic_rounds < 1:
            raise ValueError("episode caps must be >= 1")


class EpisodeStatus(Enum):
    RENDERED = "rendered"
    FAILED = "failed"


class FailureKind(Enum):
    FUNCTION_HALLUCINATION = "function_hallucination"
    FILE_HALLUCINATION = "file_hallucination"
    INDEX_ERROR = "index_error"
    OUT_OF_BOUNDS_SUBCLIP = "out_of_bounds_subclip"
    UNPARSEABLE_OUTPUT = "unparseable_output"
    BUDGET_EXHAUSTED = "budget_exhausted"
    GATEWAY_FAILURE = "gateway_failure"


class EpisodeFailure(Exception):
    def __init__(self, kind: FailureKind, message: str):
        super().__init__(message)
        self.kind = kind


@dataclass
class EpisodeResult:
    final_timeline: Timeline
    status: EpisodeStatus
    failure_kind: Optional[FailureKind]
    critic_rounds: int
    editor_steps: int
    log_ref: Optional[str]
    editor_history: Optional[History] = None
    critic_history: Optional[History] = None


class EpisodeLog:
    """JSON-lines event log with a monotonic counter instead of wall time,
    so identical runs produce byte-identical logs."""

    def __init__(self, path: Optional[str | Path]):
        self.path = Path(path) if path else None
        self._t = 0
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("", encoding="utf-8")

    def emit(self, actor: str, event: str, payload):
        record = {"t": self._t, "actor": actor, "event": event,
                  "payload": payload}
        self._t += 1
        if self.path:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, sort_keys=True) + "\n")


@dataclass
class Environment:
    """Mutable per-episode state shared by both agents."""

    collection: VideoCollection
    aroll: ArollTranscript
    embedder: TextEmbedder
    timeline: Timeline = field(default_factory=Timeline)
    o_search: list[SearchResult] = field(default_factory=list)

    def observe(self) -> Observation:
        return Observation(
            o_a=self.aroll.text,
            o_v=self.collection.summary or "",
            o_search=tuple(self.o_search),
            tau_view=render_view(self.timeline, "editor"),
        )

    def search(self, query: str):
        self.o_search = search_collection(self.collection, query,
                                          self.embedder)


def _map_mutation_error(exc: Exception) -> FailureKind:
    if isinstance(exc, UnknownFile):
        return FailureKind.FILE_HALLUCINATION
    if isinstance(exc, BadIndex):
        return FailureKind.INDEX_ERROR
    if isinstance(exc, (OutOfBounds, InvertedRange)):
        return FailureKind.OUT_OF_BOUNDS_SUBCLIP
    raise exc


def decode_action(gateway: ChatGateway, messages: list[dict], role: str,
                  log: EpisodeLog, seed: Optional[int]) -> Action:
    """Decode one action, re-prompting up to PARSE_RETRIES times on
    parse failures; classify a final failure into the taxonomy."""
    schema = action_schema(role)
    temperature = ROLE_TEMPERATURE.get(role, 0.0)
    attempt_messages = list(messages)
    failure: Optional[ParseFailure] = None
    for _ in range(1 + PARSE_RETRIES):
        try:
            raw = gateway.complete(attempt_messages, constraint=schema,
                                   temperature=temperature, seed=seed)
        except GatewayError as exc:
            raise EpisodeFailure(FailureKind.GATEWAY_FAILURE, str(exc)) from exc
        parsed = parse_action_logged(raw, role, log)
        if not isinstance(parsed, ParseFailure):
            return parsed
        failure = parsed
        attempt_messages = attempt_messages + [
            {"role": "assistant", "content": raw},
            {"role": "user",
             "content": f"Your reply was invalid: {failure.message}. "
                        "Reply with exactly one valid tool call."},
        ]
    assert failure is not None
    if failure.kind is ParseFailureKind.UNKNOWN_FUNCTION:
        raise EpisodeFailure(FailureKind.FUNCTION_HALLUCINATION,
                             failure.message)
    raise EpisodeFailure(FailureKind.UNPARSEABLE_OUTPUT, failure.message)


def parse_action_logged(raw: str, role: str, log: EpisodeLog
                        ) -> Action | ParseFailure:
    from .protocol import parse_action

    parsed = parse_action(raw, role)
    if isinstance(parsed, ParseFailure):
        log.emit("env", "error",
                 {"kind": parsed.kind.value, "message": parsed.message,
                  "raw": raw})
    return parsed


def execute_editor_action(env: Environment, action: Action):
    """Apply one editor action to the environment. Raises the timeline's
    typed errors on invalid mutations; Done is a no-op here."""
    if isinstance(action, SearchCollection):
        env.search(action.query)
    elif isinstance(action, AddToTimeline):
        env.timeline.add(env.collection, action.v, action.k,
                         action.t_s, action.t_e)
    elif isinstance(action, RemoveFromTimeline):
        env.timeline.remove(action.k)
    elif isinstance(action, SwitchClipPositions):
        env.timeline.switch(action.k, action.l)
    elif isinstance(action, MoveClip):
        env.timeline.move(action.k, action.l)
    elif not isinstance(action, Done):
        raise TypeError(f"not an editor action: {action!r}")


def run_editor_round(env: Environment, feedback: str, demos,
                     gateway: ChatGateway, config: EpisodeConfig,
                     history: History, log: EpisodeLog,
                     role: str = "editor") -> int:
    """Run editor steps until Done; returns the number of steps taken.

    In strict mode an invalid mutation aborts the episode with its
    mapped failure kind; in lenient mode the error text is handed back
    to the editor as an observation and the round continues.
    """
    error_note: Optional[str] = None
    for step in range(config.max_editor_steps_per_round):
        observation = env.observe()
        context = {
            "o_v": observation.o_v,
            "o_a": observation.o_a,
            "tau_view": observation.tau_view,
            "search_view": render_search_view(observation.o_search),
            "history_view": serialize_history(history),
        }
        if role == "editor":
            context["feedback"] = feedback
        if error_note:
            context["error_note"] = error_note
            error_note = None
        messages = assemble_prompt(role, demos, context)
        log.emit("editor", "prompt", {"role": role,
                                      "messages": len(messages)})
        action = decode_action(gateway, messages, role, log, config.seed)
        log.emit("editor", "action", json.loads(serialize_action(action)))
        history.append(observation, action)
        if isinstance(action, Done):
            return step + 1
        try:
            execute_editor_action(env, action)
        except (UnknownFile, BadIndex, OutOfBounds, InvertedRange) as exc:
            kind = _map_mutation_error(exc)
            log.emit("env", "error", {"kind": kind.value, "message": str(exc)})
            if config.strict_failures:
                raise EpisodeFailure(kind, str(exc)) from exc
            error_note = str(exc)
            continue
        except EmbedderError as exc:
            raise EpisodeFailure(FailureKind.GATEWAY_FAILURE, str(exc)) from exc
        if isinstance(action, SearchCollection):
            log.emit("env", "mutation",
                     {"op": "search", "results": len(env.o_search)})
        else:
            log.emit("env", "mutation",
                     {"op": type(action).__name__,
                      "clips": len(env.timeline),
                      "revision": env.timeline.revision})
    raise EpisodeFailure(FailureKind.BUDGET_EXHAUSTED,
                         f"editor took {config.max_editor_steps_per_round} "
                         "steps without DONE")


def run_critic_round(timeline: Timeline, history: History, request,
                     demos, gateway: ChatGateway, config: EpisodeConfig,
                     log: EpisodeLog, role: str = "critic",
                     example_labels: Optional[list[str]] = None) -> Action:
    """One critic decision: GiveFeedback or Render."""
    view = render_view(timeline, "critic")
    context = {
        "tau_view": view,
        "history_view": serialize_history(history),
    }
    if role == "critic":
        context["request"] = request.text
    if example_labels is not None:
        context["example_labels"] = example_labels
    messages = assemble_prompt(role, demos, context)
    log.emit("critic", "prompt", {"role": role, "messages": len(messages)})
    action = decode_action(gateway, messages, role, log, config.seed)
    log.emit("critic", "action", json.loads(serialize_action(action)))
    observation = Observation(o_a="", o_v="", o_search=(), tau_view=view)
    history.append(observation, action)
    return action


def run_episode(collection: VideoCollection, aroll: ArollTranscript,
                request, demos_editor, demos_critic, gateway: ChatGateway,
                config: EpisodeConfig, embedder: TextEmbedder,
                out_dir: Optional[str | Path] = None,
                initial_timeline: Optional[Timeline] = None,
                critic_role: str = "critic",
                example_labels: Optional[list[str]] = None) -> EpisodeResult:
    """Full critic-first refinement episode.

    Writes ``timeline.json`` and ``episode.jsonl`` into ``out_dir`` when
    given; the timeline file always reflects the last consistent state.
    """
    out = Path(out_dir) if out_dir else None
    log = EpisodeLog(out / "episode.jsonl" if out else None)
    env = Environment(collection=collection, aroll=aroll, embedder=embedder,
                      timeline=initial_timeline or Timeline())
    editor_history = History(owner="editor")
    critic_history = History(owner="critic")

    status = EpisodeStatus.FAILED
    failure_kind: Optional[FailureKind] = FailureKind.BUDGET_EXHAUSTED
    critic_rounds = 0
    editor_steps = 0
    try:
        for j in range(config.max_critic_rounds):
            action = run_critic_round(env.timeline, critic_history, request,
                                      demos_critic, gateway, config, log,
                                      role=critic_role,
                                      example_labels=example_labels)
            critic_rounds = j + 1
            if isinstance(action, Render):
                status = EpisodeStatus.RENDERED
                failure_kind = None
                break
            assert isinstance(action, GiveFeedback)
            editor_steps += run_editor_round(env, action.f, demos_editor,
                                             gateway, config, editor_history,
                                             log)
        else:
            raise EpisodeFailure(
                FailureKind.BUDGET_EXHAUSTED,
                f"no render within {config.max_critic_rounds} critic rounds")
    except EpisodeFailure as exc:
        status = EpisodeStatus.FAILED
        failure_kind = exc.kind
        log.emit("env", "error", {"kind": exc.kind.value,
                                  "message": str(exc), "fatal": True})

    log_ref = str(log.path) if log.path else None
    if out:
        request_text = getattr(request, "text", None)
        # Relative reference keeps the timeline file byte-identical
        # across different run directories.
        save_timeline(env.timeline, out / "timeline.json",
                      request=request_text,
                      history_ref=log.path.name if log.path else None)
    return EpisodeResult(
        final_timeline=env.timeline,
        status=status,
        failure_kind=failure_kind,
        critic_rounds=critic_rounds,
        editor_steps=editor_steps,
        log_ref=log_ref,
        editor_history=editor_history,
        critic_history=critic_history,
    )
