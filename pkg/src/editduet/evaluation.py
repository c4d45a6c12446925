"""Metrics, the automatic pairwise judge, and agreement statistics.

Covers time coverage, repetition counting, episode aggregation, the
keyframe-grid judge with A/B position derandomization, PreferenceRate,
PABAK agreement, and a purely retrieval-based baseline assembler.
"""

from __future__ import annotations

import base64
import io
import random
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .collection import VideoCollection
from .errors import (
    BadDuration,
    EmptyCollection,
    LengthMismatch,
    MissingKeyframe,
    OutOfRange,
    TieError,
    UnparseableVerdict,
)
from .gateway import ChatGateway
from .search import TextEmbedder, cosine_similarity
from .timeline import Timeline, TimelineClip

REPETITION_OVERLAP = 0.8
GRID_COLUMNS = 5


# ---------------------------------------------------------------------------
# Scalar metrics


def time_coverage(d: float, d_hat: float) -> float:
    """min/max ratio between target and produced duration."""
    if d <= 0:
        raise BadDuration(f"target duration must be positive, got {d}")
    if d_hat < 0:
        raise BadDuration(f"produced duration must be >= 0, got {d_hat}")
    if d_hat == 0:
        return 0.0
    return min(d, d_hat) / max(d, d_hat)


def _clips_repeat(a: TimelineClip, b: TimelineClip) -> bool:
    if a.source_file != b.source_file:
        return False
    intersection = min(a.end_s, b.end_s) - max(a.start_s, b.start_s)
    shorter = min(a.duration_s, b.duration_s)
    if shorter <= 0:
        return False
    return intersection / shorter >= REPETITION_OVERLAP


def count_repetitions(timeline: Timeline) -> int:
    """Near-duplicate count: clips sharing a source with >= 80% overlap
    (relative to the shorter clip) are grouped by transitive closure and
    each group of size n contributes n - 1."""
    n = len(timeline.clips)
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(n):
        for j in range(i + 1, n):
            if _clips_repeat(timeline.clips[i], timeline.clips[j]):
                parent[find(i)] = find(j)

    sizes: dict[int, int] = defaultdict(int)
    for i in range(n):
        sizes[find(i)] += 1
    return sum(size - 1 for size in sizes.values())


@dataclass
class MetricsReport:
    failure_rate: float
    mean_time_coverage: Optional[float]
    mean_repetitions: Optional[float]
    n_episodes: int

    def to_dict(self) -> dict:
        return {
            "failure_rate": self.failure_rate,
            "mean_time_coverage": self.mean_time_coverage,
            "mean_repetitions": self.mean_repetitions,
            "n_episodes": self.n_episodes,
        }


def aggregate(results, targets: list[float]) -> MetricsReport:
    """Episode-level metrics; coverage and repetitions are averaged over
    successful episodes only and absent when every episode failed."""
    from .orchestrator import EpisodeStatus

    if len(results) != len(targets):
        raise LengthMismatch(
            f"{len(results)} results vs {len(targets)} targets")
    if not results:
        raise LengthMismatch("no episodes to aggregate")
    failures = sum(1 for r in results if r.status is EpisodeStatus.FAILED)
    coverages = []
    repetitions = []
    for result, target in zip(results, targets):
        if result.status is EpisodeStatus.FAILED:
            continue
        coverages.append(time_coverage(
            target, result.final_timeline.total_duration()))
        repetitions.append(count_repetitions(result.final_timeline))
    return MetricsReport(
        failure_rate=failures / len(results),
        mean_time_coverage=(sum(coverages) / len(coverages)
                            if coverages else None),
        mean_repetitions=(sum(repetitions) / len(repetitions)
                          if repetitions else None),
        n_episodes=len(results),
    )


# ---------------------------------------------------------------------------
# Keyframe grids and the pairwise judge


def resolve_keyframes(timeline: Timeline, collection: VideoCollection,
                      media_root: str | Path) -> list[Path]:
    """Map each clip to its midpoint keyframe image via the collection's
    maximal-overlap segment."""
    from .collection import best_overlap_segment

    root = Path(media_root)
    paths = []
    for i, clip in enumerate(timeline.clips):
        segment = best_overlap_segment(collection, clip.source_file,
                                       clip.start_s, clip.end_s)
        if segment is None or segment.keyframe_ref is None:
            raise MissingKeyframe(f"clip #{i} ({clip.source_file}) has no "
                                  "resolvable keyframe")
        path = root / segment.keyframe_ref
        if not path.exists():
            raise MissingKeyframe(f"clip #{i}: keyframe {path} not found")
        paths.append(path)
    return paths


def build_keyframe_grid(timeline: Timeline, keyframe_paths: list[Path],
                        cell_size: tuple[int, int] = (320, 180)):
    """Row-major grid of midpoint keyframes, max 5 columns, each cell
    labeled with its clip index and duration.

    Returns (PIL image, caption list). Captions are '#i - X.Xs'.
    """
    from PIL import Image, ImageDraw

    if len(keyframe_paths) != len(timeline.clips):
        raise LengthMismatch("one keyframe per clip required")
    if not timeline.clips:
        raise MissingKeyframe("cannot build a grid for an empty timeline")
    captions = [f"#{i} - {clip.duration_s:.1f}s"
                for i, clip in enumerate(timeline.clips)]
    n = len(timeline.clips)
    cols = min(GRID_COLUMNS, n)
    rows = (n + cols - 1) // cols
    cw, ch = cell_size
    label_h = 20
    grid = Image.new("RGB", (cols * cw, rows * (ch + label_h)), "black")
    draw = ImageDraw.Draw(grid)
    for i, path in enumerate(keyframe_paths):
        r, c = divmod(i, cols)
        with Image.open(path) as img:
            tile = img.convert("RGB").resize((cw, ch))
        grid.paste(tile, (c * cw, r * (ch + label_h)))
        draw.text((c * cw + 4, r * (ch + label_h) + ch + 2), captions[i],
                  fill="white")
    return grid, captions


def _grid_payload(grid) -> str:
    buf = io.BytesIO()
    grid.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


@dataclass(frozen=True)
class JudgeVerdict:
    pair_id: str
    preferred: str  # "A" = first timeline argument, "B" = second
    rationale: str


JUDGE_INSTRUCTION = (
    "You are judging two candidate edits of the same B-roll sequence. "
    "For each candidate you are shown its timeline as a grid of midpoint "
    "keyframes with each sub-clip's duration, plus the total duration. "
    "Assess how well each candidate satisfies the user request in terms "
    "of structure, relevance of the selected footage, pacing among "
    "sub-clips, and overall aesthetic coherence. First explain your "
    "reasoning, then end your reply with a final line containing only "
    "the single letter A or B for your preferred candidate.")


def _slot_text(slot: str, timeline: Timeline, captions: list[str],
               grid_b64: Optional[str]) -> str:
    body = [f"Candidate {slot}:",
            f"total duration: {timeline.total_duration():.1f}s",
            "sub-clips: " + ", ".join(captions)]
    if grid_b64 is not None:
        body.append(f"keyframe grid (PNG, base64): {grid_b64}")
    return "\n".join(body)


def _parse_verdict(reply: str) -> Optional[str]:
    for line in reversed(reply.strip().splitlines()):
        token = line.strip().strip(".")
        if token in ("A", "B"):
            return token
    return None


def judge(request, tau1: Timeline, tau2: Timeline, gateway: ChatGateway,
          pair_id: str = "pair-0", seed: int = 0,
          grids: Optional[tuple] = None) -> JudgeVerdict:
    """Pairwise preference between two timelines.

    Presentation order is shuffled per (seed, pair_id) to cancel the
    judge's position bias; the verdict is mapped back so that
    preferred="A" always means tau1. ``grids`` optionally carries
    ((image, captions), (image, captions)); without them the judge sees
    text-only timeline summaries.
    """
    rng = random.Random(f"{seed}:{pair_id}")
    swap = rng.random() < 0.5
    first, second = (tau2, tau1) if swap else (tau1, tau2)

    def captions_for(t: Timeline) -> list[str]:
        return [f"#{i} - {c.duration_s:.1f}s" for i, c in enumerate(t.clips)]

    if grids is not None:
        (g1, c1), (g2, c2) = grids
        payloads = [(_grid_payload(g1), c1), (_grid_payload(g2), c2)]
        if swap:
            payloads.reverse()
    else:
        payloads = [(None, captions_for(first)), (None, captions_for(second))]

    messages = [
        {"role": "system", "content": JUDGE_INSTRUCTION},
        {"role": "user", "content": f"User request: {request.text}"},
        {"role": "user",
         "content": _slot_text("A", first, payloads[0][1], payloads[0][0])},
        {"role": "user",
         "content": _slot_text("B", second, payloads[1][1], payloads[1][0])},
    ]
    reply = gateway.complete(messages, temperature=0.0, seed=seed)
    choice = _parse_verdict(reply)
    if choice is None:
        retry = messages + [
            {"role": "assistant", "content": reply},
            {"role": "user",
             "content": "Reply with a final line containing only A or B."},
        ]
        reply = gateway.complete(retry, temperature=0.0, seed=seed)
        choice = _parse_verdict(reply)
        if choice is None:
            raise UnparseableVerdict(f"no A/B verdict in reply: {reply[:80]!r}")
    # Undo the slot shuffle: map the slot letter back to tau1/tau2.
    if swap:
        choice = "B" if choice == "A" else "A"
    return JudgeVerdict(pair_id=pair_id, preferred=choice, rationale=reply)


def preference_rate(verdicts: list[JudgeVerdict],
                    m1_side: str = "A") -> float:
    """Fraction of verdicts preferring method M1 (the m1_side slot)."""
    if not verdicts:
        raise LengthMismatch("no verdicts")
    return sum(1 for v in verdicts if v.preferred == m1_side) / len(verdicts)


# ---------------------------------------------------------------------------
# Agreement statistics


def pabak(observed_agreement: float) -> float:
    """Two-category prevalence- and bias-adjusted kappa: 2*p_o - 1."""
    if not 0.0 <= observed_agreement <= 1.0:
        raise OutOfRange(f"agreement must be in [0, 1], "
                         f"got {observed_agreement}")
    return 2.0 * observed_agreement - 1.0


def _majority(choices: list[str]) -> str:
    a = sum(1 for c in choices if c == "A")
    b = len(choices) - a
    if a == b:
        raise TieError("even split; majority undefined")
    return "A" if a > b else "B"


def agreement_stats(judge_choices: dict[str, str],
                    human_votes: dict[str, list[str]]) -> dict:
    """Judge-vs-majority raw agreement and PABAK, plus inter-human
    agreement (mean pairwise agreement across voters, per pair)."""
    pairs = sorted(judge_choices)
    if not pairs:
        raise LengthMismatch("no pairs")
    matches = 0
    for pair in pairs:
        votes = human_votes[pair]
        if len(votes) % 2 == 0:
            raise TieError(f"pair {pair}: even voter count")
        if judge_choices[pair] == _majority(votes):
            matches += 1
    raw = matches / len(pairs)

    pairwise = []
    for pair in pairs:
        votes = human_votes[pair]
        agree = total = 0
        for i in range(len(votes)):
            for j in range(i + 1, len(votes)):
                total += 1
                agree += votes[i] == votes[j]
        if total:
            pairwise.append(agree / total)
    human_raw = sum(pairwise) / len(pairwise) if pairwise else None
    return {
        "raw_agreement": raw,
        "pabak": pabak(raw),
        "human_raw_agreement": human_raw,
        "human_pabak": pabak(human_raw) if human_raw is not None else None,
    }


# ---------------------------------------------------------------------------
# Retrieval-only baseline

BASELINE_DURATION_FRACTION = 0.9


def baseline_t2v(collection: VideoCollection, request,
                 target_duration: float, embedder: TextEmbedder) -> Timeline:
    """Greedy retrieval baseline: append segments in descending request
    similarity (cycling when exhausted) until at least 90% of the target
    duration is reached. No agent loop, no labels, similarity only."""
    if not collection.segments:
        raise EmptyCollection("baseline needs a non-empty collection")
    if target_duration <= 0:
        raise BadDuration(f"target must be positive, got {target_duration}")
    query_vec = embedder.embed(request.text)
    ranked = sorted(
        collection.segments,
        key=lambda s: (-cosine_similarity(query_vec, np.asarray(s.embedding)),
                       s.source_file, s.start_s))
    timeline = Timeline()
    total = 0.0
    threshold = BASELINE_DURATION_FRACTION * target_duration
    i = 0
    while total < threshold:
        segment = ranked[i % len(ranked)]
        timeline.clips.append(TimelineClip(
            source_file=segment.source_file,
            start_s=segment.start_s,
            end_s=segment.end_s,
            description=segment.description,
            shot_type=segment.shot_type,
            camera_motion=segment.camera_motion,
        ))
        timeline.revision += 1
        total += segment.duration_s
        i += 1
    return timeline
