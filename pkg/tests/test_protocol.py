import hashlib
import json

import pytest
from hypothesis import given, strategies as st

from editduet.errors import MissingTemplate
from editduet.protocol import (
    AddToTimeline,
    Done,
    GiveFeedback,
    History,
    MoveClip,
    Observation,
    ParseFailure,
    ParseFailureKind,
    Render,
    RemoveFromTimeline,
    SearchCollection,
    SwitchClipPositions,
    UserRequest,
    action_schema,
    assemble_prompt,
    load_prompt,
    parse_action,
    render_search_view,
    serialize_action,
)

from conftest import tool


class TestActionSchema:
    def test_editor_has_six_variants(self):
        assert len(action_schema("editor")["oneOf"]) == 6

    def test_critic_has_two_variants(self):
        assert len(action_schema("critic")["oneOf"]) == 2

    def test_non_acting_role_rejected(self):
        with pytest.raises(ValueError):
            action_schema("editor_labeler")


class TestParseAction:
    def test_done(self):
        assert parse_action(tool("DONE"), "editor") == Done()

    def test_search(self):
        action = parse_action(tool("search_collection", query="bread"),
                              "editor")
        assert action == SearchCollection(query="bread")

    def test_add(self):
        action = parse_action(
            tool("add_to_timeline", v="oven.mp4", k=0, t_s=3, t_e=7.5),
            "editor")
        assert action == AddToTimeline(v="oven.mp4", k=0, t_s=3.0, t_e=7.5)
        assert isinstance(action.t_s, float)

    def test_unknown_function(self):
        failure = parse_action(tool("combine_clips"), "editor")
        assert isinstance(failure, ParseFailure)
        assert failure.kind is ParseFailureKind.UNKNOWN_FUNCTION

    def test_critic_tool_rejected_for_editor(self):
        failure = parse_action(tool("give_feedback", f="x"), "editor")
        assert failure.kind is ParseFailureKind.UNKNOWN_FUNCTION

    def test_missing_argument(self):
        failure = parse_action(
            tool("add_to_timeline", v="a", k=0, t_s=1.0), "editor")
        assert failure.kind is ParseFailureKind.BAD_ARITY

    def test_extra_argument(self):
        failure = parse_action(tool("DONE", bonus=1), "editor")
        assert failure.kind is ParseFailureKind.BAD_ARITY

    def test_bad_type(self):
        failure = parse_action(
            tool("remove_from_timeline", k="zero"), "editor")
        assert failure.kind is ParseFailureKind.BAD_TYPE

    def test_bool_is_not_an_integer(self):
        failure = parse_action(tool("remove_from_timeline", k=True), "editor")
        assert failure.kind is ParseFailureKind.BAD_TYPE

    def test_prose_not_parseable(self):
        failure = parse_action("I will now add a clip.", "editor")
        assert failure.kind is ParseFailureKind.NOT_PARSEABLE

    def test_empty_feedback_rejected(self):
        failure = parse_action(tool("give_feedback", f="  "), "critic")
        assert failure.kind is ParseFailureKind.BAD_TYPE

    def test_critic_actions(self):
        assert parse_action(tool("RENDER"), "critic") == Render()
        assert parse_action(tool("give_feedback", f="more dough"),
                            "critic") == GiveFeedback(f="more dough")


editor_actions = st.one_of(
    st.builds(SearchCollection, query=st.text(min_size=1, max_size=30)),
    st.builds(AddToTimeline,
              v=st.text(min_size=1, max_size=20),
              k=st.integers(min_value=0, max_value=50),
              t_s=st.floats(min_value=0, max_value=500,
                            allow_nan=False, allow_infinity=False),
              t_e=st.floats(min_value=0, max_value=500,
                            allow_nan=False, allow_infinity=False)),
    st.builds(RemoveFromTimeline, k=st.integers(0, 50)),
    st.builds(SwitchClipPositions, k=st.integers(0, 50), l=st.integers(0, 50)),
    st.builds(MoveClip, k=st.integers(0, 50), l=st.integers(0, 50)),
    st.just(Done()),
)

critic_actions = st.one_of(
    st.builds(GiveFeedback,
              f=st.text(min_size=1, max_size=50).filter(str.strip)),
    st.just(Render()),
)


@given(editor_actions)
def test_editor_roundtrip(action):
    assert parse_action(serialize_action(action), "editor") == action


@given(critic_actions)
def test_critic_roundtrip(action):
    assert parse_action(serialize_action(action), "critic") == action


# Content of the shipped prompt assets is pinned; any edit must be a
# deliberate decision.
PROMPT_CHECKSUMS = {
    "editor": "28fb478f17ee52c5adf549934170a09925c5e1d8ce82124aa84417e232b91367",
    "critic": "032dfe1cdb50976d5b2fa6bf1afa5eec5334d6f9e03ce4285628316b12e361e4",
    "editor_explorer": "3abd9260673bf6e546b9c7b012e09de5a5707f56e8c488f6e765f2a2e1c4c39b",
    "editor_labeler": "ad3e8977b89b1dc3af7043a9f402e5db688c74843bd1208560f353405ccfe502",
    "editor_scorer": "33871bea8f16ee6c57039931dd23862bcba301fcc5fc9f5bb6625b946ec89246",
    "critic_explorer": "4736a538a5fbe48ad1ca7920e693e6399fbb35568d89f85a9f8b0d81a51e8302",
    "critic_labeler": "2c5fdd0095069f73297d4ca14d053f878a0f2a3f15a5f3f298d75c858759a956",
    "critic_scorer": "04ea342e73418edd7e13dd4ae31dfff7112805e2f01144e0b80fc765ecfd0862",
}


class TestPromptCatalog:
    @pytest.mark.parametrize("role", sorted(PROMPT_CHECKSUMS))
    def test_checksum(self, role):
        digest = hashlib.sha256(load_prompt(role).encode()).hexdigest()
        assert digest == PROMPT_CHECKSUMS[role], f"prompt {role} changed"

    def test_missing_template(self):
        with pytest.raises(MissingTemplate):
            load_prompt("director")


def make_demo(label="tighten the pacing", stage="editor"):
    from editduet.demos import Demonstration

    history = History(owner="editor")
    empty = Observation(o_a="", o_v="", o_search=(), tau_view="")
    history.append(empty, Done())
    return Demonstration(stage=stage, label=label, trajectory=history,
                         initial_view="(timeline is empty)",
                         final_view="(timeline is empty)", score=5)


EDITOR_CONTEXT = {
    "feedback": "add close-ups of dough",
    "o_v": "a bakery",
    "o_a": "we bake bread",
    "tau_view": "(timeline is empty)",
    "search_view": "(no search results)",
}


class TestAssemblePrompt:
    def test_editor_demo_blocks_in_order(self):
        demos = [make_demo(f"label number {i}") for i in range(5)]
        messages = assemble_prompt("editor", demos, EDITOR_CONTEXT)
        system = messages[0]["content"]
        positions = [system.index(f"label number {i}") for i in range(5)]
        assert positions == sorted(positions)
        assert system.count("### Example") == 5

    def test_zero_demos_still_valid(self):
        messages = assemble_prompt("editor", [], EDITOR_CONTEXT)
        assert "{in-context examples}" not in messages[0]["content"]
        assert messages[0]["role"] == "system"

    def test_function_definitions_substituted(self):
        messages = assemble_prompt("editor", [], EDITOR_CONTEXT)
        assert "def add_to_timeline(" in messages[0]["content"]
        assert "{function definitions in Python}" not in \
            messages[0]["content"]

    def test_editor_context_order(self):
        messages = assemble_prompt("editor", [], EDITOR_CONTEXT)
        texts = [m["content"] for m in messages[1:]]
        assert texts[0].startswith("Feedback:")
        assert texts[1].startswith("Video collection summary:")
        assert texts[2].startswith("A-roll transcription:")
        assert texts[3].startswith("Current timeline:")
        assert texts[4].startswith("Search panel:")

    def test_critic_explorer_gets_example_labels(self):
        messages = assemble_prompt("critic_explorer", [], {
            "tau_view": "(timeline is empty)",
            "example_labels": ["make a montage", "add close-ups"],
        })
        system = messages[0]["content"]
        assert "- make a montage" in system
        assert "- add close-ups" in system

    def test_deterministic(self):
        demos = [make_demo()]
        first = assemble_prompt("editor", demos, EDITOR_CONTEXT)
        second = assemble_prompt("editor", demos, EDITOR_CONTEXT)
        assert first == second

    def test_critic_context(self):
        messages = assemble_prompt("critic", [], {
            "request": "an 18 second montage",
            "tau_view": "(timeline is empty)",
        })
        assert any("User request: an 18 second montage" in m["content"]
                   for m in messages)


class TestWrappers:
    def test_empty_request_rejected(self):
        with pytest.raises(ValueError):
            UserRequest("   ")

    def test_search_view_limits_to_five(self, bakery_collection):
        from editduet.search import SearchResult

        results = tuple(SearchResult(segment=s, score=0.5)
                        for s in bakery_collection.segments * 2)
        view = render_search_view(results)
        assert view.count("result ") == 5

    def test_empty_search_view(self):
        assert render_search_view(()) == "(no search results)"

    def test_no_embeddings_in_search_view(self, bakery_collection):
        from editduet.search import SearchResult

        results = (SearchResult(segment=bakery_collection.segments[0],
                                score=0.25),)
        assert "1.0, 0.0" not in render_search_view(results)
