"""Deterministic engine and harness for meta-referential games.

Procedurally generates symbolic spaces encoded as symbolic continuous
stimuli, runs meta-episodes of referential games, and evaluates listeners
(built-in or external over the wire protocol) on zero-shot compositional
tests.
"""

from .agents import (
    CheatListener,
    CheatSpeaker,
    OracleListener,
    PosdisSpeaker,
    RandomListener,
    posdis_speak,
)
from .episode import (
    EpisodeConfig,
    EpisodeState,
    StepRecord,
    VocabPermutation,
    apply_permutation,
    begin_episode,
    episode_summary,
)
from .metrics import (
    LanguageTable,
    MetricResult,
    bosdis,
    posdis,
    reconstruction_accuracy,
    summarize_traces,
    topographic_similarity,
)
from .recall import RecallConfig, begin_recall_episode, recall_summary, run_recall_episode
from .refgame import (
    NO_OP,
    NO_TARGET,
    GameConfig,
    GameState,
    ListenerAction,
    listener_view,
    new_game,
    resolve_decision,
    speaker_view,
)
from .runner import RunConfig, drive_episode, run_batch, run_episode
from .scs import (
    ScsCodebook,
    StructureTracker,
    build_codebook,
    decode_ml,
    encode_ohe,
    infer_structure,
    sample_scs,
    sample_scs_batch,
    section_bounds,
)
from .semantics import (
    Latent,
    SeedPath,
    SemanticStructure,
    ZsctSplit,
    derive_rng,
    enumerate_space,
    make_zsct_split,
    sample_structure,
    seed_fingerprint,
)

__version__ = "0.1.0"

__all__ = [
    "CheatListener",
    "CheatSpeaker",
    "EpisodeConfig",
    "EpisodeState",
    "GameConfig",
    "GameState",
    "LanguageTable",
    "Latent",
    "ListenerAction",
    "MetricResult",
    "NO_OP",
    "NO_TARGET",
    "OracleListener",
    "PosdisSpeaker",
    "RandomListener",
    "RecallConfig",
    "RunConfig",
    "ScsCodebook",
    "SeedPath",
    "SemanticStructure",
    "StepRecord",
    "StructureTracker",
    "VocabPermutation",
    "ZsctSplit",
    "apply_permutation",
    "begin_episode",
    "begin_recall_episode",
    "bosdis",
    "build_codebook",
    "decode_ml",
    "derive_rng",
    "drive_episode",
    "encode_ohe",
    "enumerate_space",
    "episode_summary",
    "infer_structure",
    "listener_view",
    "make_zsct_split",
    "new_game",
    "posdis",
    "posdis_speak",
    "recall_summary",
    "reconstruction_accuracy",
    "resolve_decision",
    "run_batch",
    "run_episode",
    "run_recall_episode",
    "sample_scs",
    "sample_scs_batch",
    "sample_structure",
    "section_bounds",
    "seed_fingerprint",
    "speaker_view",
    "summarize_traces",
    "topographic_similarity",
]
