"""Exception types shared across the engine."""

from __future__ import annotations


class EngineError(Exception):
    """Base class for engine-specific failures."""


class SplitInfeasibleError(EngineError):
    """No held-out stimulus can be removed without breaking value coverage."""


class BucketTooSmallError(EngineError):
    """A split bucket has too few stimuli to build a candidate set."""


class IllegalActionError(EngineError):
    """An action violates the current phase or the legal action set."""


class GameResolvedError(EngineError):
    """Operation attempted on an already-resolved game."""


class EpisodeDoneError(EngineError):
    """Stepping or querying an episode that has already finished."""


class NotDoneError(EngineError):
    """Summary requested before the episode finished."""


class VocabTooSmallError(EngineError):
    """Vocabulary cannot express the required token range."""


class CodebookMismatchError(EngineError):
    """Observed outcomes are inconsistent with the granted ground truth."""


class MalformedTraceError(EngineError):
    """A trace line failed to parse or misses required fields."""

    def __init__(self, line_number: int, reason: str):
        super().__init__(f"line {line_number}: {reason}")
        self.line_number = line_number
        self.reason = reason


class ProtocolError(EngineError):
    """Wire-protocol violation (bad message type, broken alternation, version)."""
