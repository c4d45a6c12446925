"""Agent action grammar, observations, and prompt assembly.

Model output is a single JSON object ``{"tool": name, "args": {...}}``
decoded strictly against the acting role's tool set. Prompt templates
are shipped as text assets with ``{...}`` substitution slots.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Optional, Union

from .errors import MissingTemplate
from .search import SearchResult

# ---------------------------------------------------------------------------
# Actions


@dataclass(frozen=True)
class SearchCollection:
    query: str


@dataclass(frozen=True)
class AddToTimeline:
    v: str
    k: int
    t_s: float
    t_e: float


@dataclass(frozen=True)
class RemoveFromTimeline:
    k: int


@dataclass(frozen=True)
class SwitchClipPositions:
    k: int
    l: int


@dataclass(frozen=True)
class MoveClip:
    k: int
    l: int


@dataclass(frozen=True)
class Done:
    pass


@dataclass(frozen=True)
class GiveFeedback:
    f: str


@dataclass(frozen=True)
class Render:
    pass


EditorAction = Union[SearchCollection, AddToTimeline, RemoveFromTimeline,
                     SwitchClipPositions, MoveClip, Done]
CriticAction = Union[GiveFeedback, Render]
Action = Union[EditorAction, CriticAction]

# tool name -> (class, {arg name: json type})
_EDITOR_TOOLS: dict[str, tuple[type, dict[str, str]]] = {
    "search_collection": (SearchCollection, {"query": "string"}),
    "add_to_timeline": (AddToTimeline, {"v": "string", "k": "integer",
                                        "t_s": "number", "t_e": "number"}),
    "remove_from_timeline": (RemoveFromTimeline, {"k": "integer"}),
    "switch_clip_positions": (SwitchClipPositions, {"k": "integer",
                                                    "l": "integer"}),
    "move_clip": (MoveClip, {"k": "integer", "l": "integer"}),
    "DONE": (Done, {}),
}

_CRITIC_TOOLS: dict[str, tuple[type, dict[str, str]]] = {
    "give_feedback": (GiveFeedback, {"f": "string"}),
    "RENDER": (Render, {}),
}

EDITOR_ROLES = frozenset({"editor", "editor_explorer"})
CRITIC_ROLES = frozenset({"critic", "critic_explorer"})

_TOOL_DOCS = {
    "search_collection": "Search the video collection; shows the top five matching sub-clips in the search panel.",
    "add_to_timeline": "Insert the sub-clip of video v between t_s and t_e seconds at index k of the timeline.",
    "remove_from_timeline": "Remove the clip at index k of the timeline.",
    "switch_clip_positions": "Swap the clips at indices k and l of the timeline.",
    "move_clip": "Move the clip at index k of the timeline to index l.",
    "DONE": "Signal that the feedback received has been satisfied.",
    "give_feedback": "Send feedback string f to the editor, starting a new editing iteration.",
    "RENDER": "Signal that the video is ready to be rendered.",
}

_PY_TYPES = {"string": "str", "integer": "int", "number": "float"}


def _tools_for_role(role: str) -> dict[str, tuple[type, dict[str, str]]]:
    if role in EDITOR_ROLES:
        return _EDITOR_TOOLS
    if role in CRITIC_ROLES:
        return _CRITIC_TOOLS
    raise ValueError(f"role {role!r} does not take actions")


def function_definitions(role: str) -> str:
    """Python-style tool stubs substituted into the prompt templates."""
    blocks = []
    for name, (_, args) in _tools_for_role(role).items():
        params = ", ".join(f"{a}: {_PY_TYPES[t]}" for a, t in args.items())
        blocks.append(f"def {name}({params}):\n"
                      f"    \"\"\"{_TOOL_DOCS[name]}\"\"\"")
    return "\n\n".join(blocks)


def action_schema(role: str) -> dict:
    """JSON schema constraining decoding to the role's action variants."""
    variants = []
    for name, (_, args) in _tools_for_role(role).items():
        variants.append({
            "type": "object",
            "properties": {
                "tool": {"const": name},
                "args": {
                    "type": "object",
                    "properties": {a: {"type": t} for a, t in args.items()},
                    "required": sorted(args),
                    "additionalProperties": False,
                },
            },
            "required": ["tool", "args"],
            "additionalProperties": False,
        })
    return {"oneOf": variants}


class ParseFailureKind(Enum):
    UNKNOWN_FUNCTION = "unknown_function"
    BAD_ARITY = "bad_arity"
    BAD_TYPE = "bad_type"
    NOT_PARSEABLE = "not_parseable"


@dataclass(frozen=True)
class ParseFailure:
    kind: ParseFailureKind
    message: str


def serialize_action(action: Action) -> str:
    """Wire encoding of an action; inverse of parse_action."""
    for tools in (_EDITOR_TOOLS, _CRITIC_TOOLS):
        for name, (cls, args) in tools.items():
            if isinstance(action, cls):
                return json.dumps(
                    {"tool": name,
                     "args": {a: getattr(action, a) for a in args}})
    raise TypeError(f"not an action: {action!r}")


def _check_type(value, json_type: str) -> bool:
    if json_type == "string":
        return isinstance(value, str)
    if json_type == "integer":
        return isinstance(value, int) and not isinstance(value, bool)
    if json_type == "number":
        return (isinstance(value, (int, float))
                and not isinstance(value, bool))
    raise ValueError(json_type)


def parse_action(raw: str, role: str) -> Action | ParseFailure:
    """Strictly decode model text into a typed action for the role."""
    tools = _tools_for_role(role)
    try:
        data = json.loads(raw)
    except (TypeError, json.JSONDecodeError):
        return ParseFailure(ParseFailureKind.NOT_PARSEABLE,
                            "reply is not a JSON object")
    if not isinstance(data, dict) or not isinstance(data.get("tool"), str):
        return ParseFailure(ParseFailureKind.NOT_PARSEABLE,
                            "reply lacks a 'tool' field")
    name = data["tool"]
    if name not in tools:
        return ParseFailure(ParseFailureKind.UNKNOWN_FUNCTION,
                            f"unknown function {name!r}")
    cls, arg_types = tools[name]
    args = data.get("args", {})
    if not isinstance(args, dict):
        return ParseFailure(ParseFailureKind.BAD_TYPE, "'args' must be an object")
    if set(args) != set(arg_types):
        missing = sorted(set(arg_types) - set(args))
        extra = sorted(set(args) - set(arg_types))
        return ParseFailure(
            ParseFailureKind.BAD_ARITY,
            f"{name}: missing {missing or 'none'}, unexpected {extra or 'none'}")
    coerced = {}
    for arg, json_type in arg_types.items():
        value = args[arg]
        if not _check_type(value, json_type):
            return ParseFailure(ParseFailureKind.BAD_TYPE,
                                f"{name}: argument {arg!r} must be a {json_type}")
        coerced[arg] = float(value) if json_type == "number" else value
    if cls is GiveFeedback and not coerced["f"].strip():
        return ParseFailure(ParseFailureKind.BAD_TYPE,
                            "give_feedback: f must be non-empty")
    return cls(**coerced)


# ---------------------------------------------------------------------------
# Observations, histories and request/feedback wrappers


@dataclass(frozen=True)
class UserRequest:
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("user request must be non-empty")


@dataclass(frozen=True)
class Feedback:
    text: str
    critic_step: int

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("feedback must be non-empty")


@dataclass(frozen=True)
class Observation:
    """The four environment observables presented to the editor."""

    o_a: str
    o_v: str
    o_search: tuple[SearchResult, ...]
    tau_view: str


@dataclass
class History:
    """Append-only observation/action trace for one agent."""

    owner: str  # "editor" | "critic"
    steps: list[tuple[Observation, Action]] = field(default_factory=list)

    def append(self, observation: Observation, action: Action):
        self.steps.append((observation, action))

    def actions(self) -> list[Action]:
        return [a for _, a in self.steps]

    def __len__(self) -> int:
        return len(self.steps)


def render_search_view(results: list[SearchResult] | tuple[SearchResult, ...]
                       ) -> str:
    """Textual search panel; embeddings never appear in prompts."""
    if not results:
        return "(no search results)"
    lines = []
    for i, r in enumerate(results[:5]):
        s = r.segment
        lines.append(
            f"result {i}: file: {s.source_file} | start: {s.start_s:.1f}s | "
            f"end: {s.end_s:.1f}s | duration: {s.duration_s:.1f}s | "
            f"score: {r.score:.3f} | shot: {s.shot_type} | "
            f"motion: {s.camera_motion} | description: {s.description}")
    return "\n".join(lines)


def serialize_history(history: History) -> str:
    """One line per past action, for prompt context."""
    if not history.steps:
        return "(no previous actions)"
    return "\n".join(f"step {i}: {serialize_action(a)}"
                     for i, (_, a) in enumerate(history.steps))


# ---------------------------------------------------------------------------
# Prompt catalog and assembly

PROMPT_ROLES = (
    "editor",
    "critic",
    "editor_explorer",
    "editor_labeler",
    "editor_scorer",
    "critic_explorer",
    "critic_labeler",
    "critic_scorer",
)

_PROMPT_FILES = {
    "editor": "editor_agent.txt",
    "critic": "critic_agent.txt",
    "editor_explorer": "editor_explorer.txt",
    "editor_labeler": "editor_labeler.txt",
    "editor_scorer": "editor_scorer.txt",
    "critic_explorer": "critic_explorer.txt",
    "critic_labeler": "critic_labeler.txt",
    "critic_scorer": "critic_scorer.txt",
}

FUNCTIONS_SLOT = "{function definitions in Python}"
DEMOS_SLOT = "{in-context examples}"
LABELS_SLOT = "{example synthetic labels from Editor exploration}"

REPLY_INSTRUCTION = (
    'Reply with exactly one JSON object of the form '
    '{"tool": <function name>, "args": {<parameters>}} and nothing else.')


def load_prompt(role: str) -> str:
    if role not in _PROMPT_FILES:
        raise MissingTemplate(f"no prompt template for role {role!r}")
    ref = resources.files("editduet.prompts") / _PROMPT_FILES[role]
    return ref.read_text(encoding="utf-8")


def format_demo(demo) -> str:
    """Serialize one demonstration into a prompt block."""
    header = ("Feedback" if demo.stage == "editor" else "User request")
    lines = [
        "### Example",
        f"{header}: {demo.label}",
        "Initial timeline:",
        demo.initial_view,
        "Actions:",
        serialize_history(demo.trajectory),
        "Final timeline:",
        demo.final_view,
    ]
    return "\n".join(lines)


def _demo_block(demos) -> str:
    return "\n\n".join(format_demo(d) for d in demos) if demos else ""


def _user(content: str) -> dict:
    return {"role": "user", "content": content}


def assemble_prompt(role: str, demos, context: dict) -> list[dict]:
    """Build the full message list for one gateway call.

    ``context`` carries the role-specific fields; after the system
    message, context messages follow a fixed documented order so that
    assembly is deterministic.
    """
    template = load_prompt(role)
    if FUNCTIONS_SLOT in template:
        template = template.replace(FUNCTIONS_SLOT, function_definitions(role))
    if DEMOS_SLOT in template:
        template = template.replace(DEMOS_SLOT, _demo_block(demos))
    if LABELS_SLOT in template:
        labels = context.get("example_labels", [])
        template = template.replace(
            LABELS_SLOT, "\n".join(f"- {x}" for x in labels))
    messages = [{"role": "system", "content": template.strip()}]

    if role == "editor":
        messages.append(_user(f"Feedback: {context['feedback']}"))
        messages.append(_user(f"Video collection summary: {context['o_v']}"))
        messages.append(_user(f"A-roll transcription: {context['o_a']}"))
        messages.append(_user(f"Current timeline:\n{context['tau_view']}"))
        messages.append(_user(f"Search panel:\n{context['search_view']}"))
    elif role == "editor_explorer":
        messages.append(_user(f"Video collection summary: {context['o_v']}"))
        messages.append(_user(f"Current timeline:\n{context['tau_view']}"))
        messages.append(_user(f"Search panel:\n{context['search_view']}"))
    elif role == "critic":
        messages.append(_user(f"User request: {context['request']}"))
        messages.append(_user(f"Current timeline:\n{context['tau_view']}"))
    elif role == "critic_explorer":
        messages.append(_user(f"Current timeline:\n{context['tau_view']}"))
    elif role == "editor_labeler":
        messages.append(_user(f"Initial timeline:\n{context['initial_view']}"))
        messages.append(_user(f"Final timeline:\n{context['final_view']}"))
    elif role == "editor_scorer":
        messages.append(_user(f"Initial timeline:\n{context['initial_view']}"))
        messages.append(_user(
            "Intermediate changes:\n" + context["trajectory_view"]))
        messages.append(_user(f"Final timeline:\n{context['final_view']}"))
        messages.append(_user(f"User feedback: {context['label']}"))
    elif role == "critic_labeler":
        messages.append(_user(f"Initial timeline:\n{context['initial_view']}"))
        feedbacks = context.get("feedback_history", [])
        listing = "\n".join(f"feedback {i}: {f}"
                            for i, f in enumerate(feedbacks))
        messages.append(_user("Feedback given before rendering:\n"
                              + (listing or "(none)")))
        messages.append(_user(f"Final timeline:\n{context['final_view']}"))
    elif role == "critic_scorer":
        messages.append(_user(f"User query: {context['label']}"))
        messages.append(_user(f"Final timeline:\n{context['final_view']}"))
    else:
        raise MissingTemplate(f"no prompt template for role {role!r}")

    if "history_view" in context:
        messages.append(_user("Your previous actions:\n"
                              + context["history_view"]))
    if context.get("error_note"):
        messages.append(_user(f"Environment error: {context['error_note']}"))
    if role in EDITOR_ROLES or role in CRITIC_ROLES:
        messages.append(_user(REPLY_INSTRUCTION))
    return messages
