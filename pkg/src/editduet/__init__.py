"""EditDuet: a multi-agent non-linear video editing engine.

An Editor agent mutates a B-roll timeline through typed tool calls, a
Critic agent reviews it against the user request, and a two-stage
exploration process synthesizes the in-context demonstrations that make
their communication work. Includes a full evaluation suite with an
automatic pairwise judge.
"""

__version__ = "0.1.0"

from .collection import (  # noqa: F401
    ArollTranscript,
    VideoCollection,
    VideoSegment,
    load_collection,
    load_transcript,
    segment_lookup,
    summarize_collection,
)
from .gateway import (  # noqa: F401
    ChatGateway,
    RecordReplayGateway,
    RemoteGateway,
    ScriptedEntry,
    ScriptedGateway,
    record_replay,
)
from .orchestrator import (  # noqa: F401
    EpisodeConfig,
    EpisodeResult,
    EpisodeStatus,
    Environment,
    FailureKind,
    run_episode,
)
from .protocol import UserRequest  # noqa: F401
from .search import HashEmbedder, search_collection  # noqa: F401
from .timeline import Timeline, TimelineClip, init_random  # noqa: F401
