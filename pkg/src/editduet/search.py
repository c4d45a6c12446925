"""Semantic search over a video collection.

Queries are embedded into the collection's embedding space, scored by
cosine similarity against every segment, deduplicated by the
overlap rule, and truncated to the top five results.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .collection import VideoCollection, VideoSegment
from .errors import EmbedderError

MAX_RESULTS = 5

# A longer clip suppresses an overlapping shorter one when its score is
# at least this fraction of the shorter clip's score.
DEDUP_SCORE_RATIO = 0.9


@dataclass(frozen=True)
class SearchResult:
    segment: VideoSegment
    score: float


class TextEmbedder(Protocol):
    def embed(self, query: str) -> np.ndarray: ...


class HashEmbedder:
    """Deterministic text embedder for tests and offline runs.

    Each query is hashed into an RNG seed and expanded into a unit
    vector, so identical queries always map to identical embeddings
    without any model or network dependency.
    """

    def __init__(self, dim: int, seed: int = 0):
        if dim < 1:
            raise ValueError("embedding dimension must be >= 1")
        self.dim = dim
        self.seed = seed

    def embed(self, query: str) -> np.ndarray:
        digest = hashlib.sha256(f"{self.seed}:{query}".encode()).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        vec = rng.standard_normal(self.dim)
        norm = np.linalg.norm(vec)
        return vec / norm if norm > 0 else vec


class HttpEmbedder:
    """Embedder backed by an external HTTP embedding endpoint."""

    def __init__(self, base_url: str, api_key: str | None = None,
                 timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.timeout = timeout

    def embed(self, query: str) -> np.ndarray:
        import requests

        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = requests.post(self.base_url, json={"input": query},
                                 headers=headers, timeout=self.timeout)
            resp.raise_for_status()
            data = resp.json()
        except Exception as exc:
            raise EmbedderError(str(exc)) from exc
        if "embedding" not in data:
            raise EmbedderError("endpoint reply lacks 'embedding'")
        return np.asarray(data["embedding"], dtype=float)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def _overlaps(a: VideoSegment, b: VideoSegment) -> bool:
    if a.source_file != b.source_file:
        return False
    return min(a.end_s, b.end_s) > max(a.start_s, b.start_s)


def _longer_shorter(x: SearchResult, y: SearchResult
                    ) -> tuple[SearchResult, SearchResult]:
    # Equal durations: the earlier-starting clip counts as the longer one.
    if x.segment.duration_s != y.segment.duration_s:
        return (x, y) if x.segment.duration_s > y.segment.duration_s else (y, x)
    return (x, y) if x.segment.start_s <= y.segment.start_s else (y, x)


def dedup_overlapping(candidates: list[SearchResult]) -> list[SearchResult]:
    """Drop shorter clips dominated by overlapping longer ones.

    The rule is evaluated over every pair of the incoming candidate set:
    when two clips of the same source overlap in time and the longer one
    scores at least 90% of the shorter one's score, the shorter is
    removed. All firing pairs are considered, so a clip that is itself
    removed still suppresses its own shorter peers; this makes the
    result order-independent and a fixpoint of the rule.
    """
    doomed: set[int] = set()
    for i in range(len(candidates)):
        for j in range(i + 1, len(candidates)):
            if not _overlaps(candidates[i].segment, candidates[j].segment):
                continue
            longer, shorter = _longer_shorter(candidates[i], candidates[j])
            if longer.score >= DEDUP_SCORE_RATIO * shorter.score:
                doomed.add(id(shorter))
    return [c for c in candidates if id(c) not in doomed]


def _result_order(result: SearchResult) -> tuple:
    # Score descending; ties broken by (source_file, start_s) ascending.
    return (-result.score, result.segment.source_file, result.segment.start_s)


def search_collection(collection: VideoCollection, query: str,
                      embedder: TextEmbedder) -> list[SearchResult]:
    """Top-5 segments by cosine similarity to the query, deduplicated."""
    if not query:
        raise ValueError("query must be non-empty")
    if not collection.segments:
        return []
    query_vec = embedder.embed(query)
    candidates = [
        SearchResult(segment=s,
                     score=cosine_similarity(query_vec,
                                             np.asarray(s.embedding)))
        for s in collection.segments
    ]
    kept = dedup_overlapping(candidates)
    kept.sort(key=_result_order)
    return kept[:MAX_RESULTS]
