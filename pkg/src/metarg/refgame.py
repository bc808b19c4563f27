"""Single referential game: candidate assembly, observations, resolution.

One game shows a speaker the view of a described stimulus and asks a
listener to find it among K+1 candidate views.  In descriptive mode the
described stimulus may be absent from the candidates, in which case the
correct decision is the explicit no-target answer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import BucketTooSmallError, GameResolvedError, IllegalActionError
from .scs import ScsCodebook, sample_scs
from .semantics import Latent

# Decision sentinels: candidate picks are 0..K.
NO_OP = -1
NO_TARGET = -2


@dataclass(frozen=True)
class GameConfig:
    """Knobs of a single referential game.

    ``o_samples`` caps how many distinct views a latent may show per shot
    cycle; 1 means stimulus-centrism (speaker and listener share the exact
    same vector).  ``rounds`` > 1 inserts pure communication turns before
    the decision turn; listener utterances are recorded but never reach the
    speaker.
    """

    k_distractors: int = 3
    descriptive: bool = True
    target_present_prob: float = 1.0
    o_samples: int = 1
    sentence_len: int | None = None  # None resolves to n_dim + 1 at episode setup
    vocab_size: int = 10
    rounds: int = 1
    reward_correct: float = 1.0
    reward_incorrect: float = 0.0
    reveal_target_after_decision: bool = False

    def __post_init__(self):
        if self.k_distractors < 1:
            raise ValueError("k_distractors must be >= 1")
        if self.o_samples < 1:
            raise ValueError("o_samples must be >= 1")
        if not 0.0 <= self.target_present_prob <= 1.0:
            raise ValueError("target_present_prob must lie in [0, 1]")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.vocab_size < 1:
            raise ValueError("vocab_size must be >= 1")


@dataclass
class GameState:
    """Mutable state of one game; resolved exactly once."""

    target: Latent  # the described stimulus (present among candidates or not)
    target_index: int | None  # position among candidates; None when absent
    candidates: tuple[Latent, ...]
    speaker_view: np.ndarray
    listener_views: tuple[np.ndarray, ...]
    message: tuple[int, ...] = ()  # post-permutation tokens uttered so far
    round: int = 1
    resolved: bool = False
    listener_tokens: list[int] = field(default_factory=list)

    @property
    def ground_truth_decision(self) -> int:
        return self.target_index if self.target_index is not None else NO_TARGET


@dataclass(frozen=True)
class ListenerAction:
    """One listener step: an utterance token plus a decision.

    The decision must be NO_OP on communication turns and a candidate index
    (or NO_TARGET in descriptive mode) on the decision turn.
    """

    token: int = 0
    decision: int = NO_OP


@dataclass(frozen=True)
class SpeakerObservation:
    """What the speaker sees: only its own stimulus, never the candidates.

    ``latent`` carries the described stimulus's ground-truth values for the
    engine's scripted speakers (the speaker is environment machinery in the
    single-listener setting); view-only speakers simply ignore it.
    """

    stimulus: np.ndarray
    round: int
    latent: Latent


@dataclass(frozen=True)
class ListenerObservation:
    """What the listener sees: all candidate views plus the message so far."""

    views: tuple[np.ndarray, ...]
    message: tuple[int, ...]
    round: int
    decision_turn: bool
    no_target_allowed: bool

    @property
    def n_candidates(self) -> int:
        return len(self.views)


ViewFn = Callable[[Latent], np.ndarray]


def new_game(
    rng: np.random.Generator,
    bucket: Sequence[Latent],
    target: Latent,
    codebook: ScsCodebook,
    config: GameConfig,
    *,
    view_fn: ViewFn | None = None,
    extra_pool: Sequence[Latent] = (),
) -> GameState:
    """Assemble one game around ``target`` drawn from its split bucket.

    Distractors come uniformly without replacement from the same bucket, so
    train games never expose held-out combinations.  When the bucket itself
    is too small (tiny test sides of small spaces), the shortfall is topped
    up from ``extra_pool``; only a space that cannot fill K+1 distinct
    candidates at all raises.  In descriptive mode a
    Bernoulli(1 - target_present_prob) draw may swap the target out of the
    candidate set; the speaker still describes it and the ground truth
    becomes no-target.  Stream order is fixed: distractors, presence draw,
    replacement, placement, speaker view, candidate views in final order.
    """
    if view_fn is None:
        view_fn = lambda latent: sample_scs(codebook, latent, rng)

    others = [s for s in bucket if s != target]
    spares = [s for s in extra_pool if s != target and s not in others]
    if len(others) + len(spares) < config.k_distractors:
        raise BucketTooSmallError(
            f"{len(others) + len(spares)} stimuli cannot supply {config.k_distractors} distractors"
        )
    if len(others) >= config.k_distractors:
        picks = rng.choice(len(others), size=config.k_distractors, replace=False)
        distractors = [others[int(j)] for j in picks]
    else:
        picks = rng.choice(len(spares), size=config.k_distractors - len(others), replace=False)
        distractors = others + [spares[int(j)] for j in picks]

    present = True
    if config.descriptive:
        present = bool(rng.random() < config.target_present_prob)
    if present:
        lineup = distractors + [target]
    else:
        pool = [s for s in others + spares if s not in distractors]
        if not pool:
            raise BucketTooSmallError("no replacement stimulus available for a target-absent game")
        lineup = distractors + [pool[int(rng.integers(len(pool)))]]

    order = rng.permutation(len(lineup))
    candidates = tuple(lineup[int(j)] for j in order)
    target_index = candidates.index(target) if present else None

    speaker_view = view_fn(target)
    listener_views = tuple(view_fn(c) for c in candidates)
    return GameState(
        target=target,
        target_index=target_index,
        candidates=candidates,
        speaker_view=speaker_view,
        listener_views=listener_views,
    )


def speaker_view(state: GameState) -> SpeakerObservation:
    """The speaker's observation: described stimulus and round index only."""
    if state.resolved:
        raise GameResolvedError("speaker queried on a resolved game")
    return SpeakerObservation(
        stimulus=state.speaker_view, round=state.round, latent=state.target
    )


def listener_view(state: GameState, config: GameConfig) -> ListenerObservation:
    """The listener's observation for the current round."""
    message = state.message
    if not message:
        sentence_len = config.sentence_len or (len(state.target) + 1)
        message = (0,) * sentence_len
    return ListenerObservation(
        views=state.listener_views,
        message=message,
        round=state.round,
        decision_turn=state.round >= config.rounds,
        no_target_allowed=config.descriptive,
    )


def resolve_decision(
    state: GameState, action: ListenerAction, config: GameConfig
) -> tuple[float, bool, dict]:
    """Score the listener's decision and close the game.

    Returns ``(reward, correct, outcome)``; the outcome dict carries the
    ground-truth decision when the reveal diagnostic is enabled.
    """
    if state.resolved:
        raise GameResolvedError("game already resolved")
    if action.decision == NO_OP:
        raise IllegalActionError("decision turn requires a real decision, not no-op")
    if action.decision == NO_TARGET:
        if not config.descriptive:
            raise IllegalActionError("no-target is only legal in descriptive mode")
    elif not 0 <= action.decision < len(state.candidates):
        raise IllegalActionError(
            f"decision {action.decision} outside candidate range 0..{len(state.candidates) - 1}"
        )

    correct = action.decision == state.ground_truth_decision
    reward = config.reward_correct if correct else config.reward_incorrect
    state.resolved = True
    outcome = {"reward": reward, "correct": correct, "decision": action.decision}
    if config.reveal_target_after_decision:
        outcome["ground_truth"] = state.ground_truth_decision
    return reward, correct, outcome
