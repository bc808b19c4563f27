"""Meta-episode orchestration: one sampled symbolic space, S shots, one test shot.

An episode samples a structure, codebook, ZSCT split and vocabulary
permutation, then runs one referential game per train stimulus for each of
S training shots followed by one game per held-out stimulus.  Messages are
permuted before the listener sees them; listener utterances never reach the
speaker.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import EpisodeDoneError, IllegalActionError, NotDoneError
from .refgame import (
    NO_OP,
    GameConfig,
    GameState,
    ListenerAction,
    ListenerObservation,
    listener_view,
    new_game,
    resolve_decision,
    speaker_view,
)
from .scs import ScsCodebook, build_codebook, sample_scs
from .semantics import (
    Latent,
    SeedPath,
    SemanticStructure,
    ZsctSplit,
    derive_rng,
    enumerate_space,
    make_zsct_split,
    sample_structure,
)

PHASE_TRAIN = "train"
PHASE_TEST = "test"
PHASE_DONE = "done"


@dataclass(frozen=True)
class EpisodeConfig:
    """Everything needed to reproduce one meta-episode bit-for-bit."""

    n_dim: int = 3
    v_min: int = 2
    v_max: int = 5
    shots: int = 2
    game: GameConfig = field(default_factory=GameConfig)
    holdout_fraction: float = 0.2
    permute_vocab: bool = True
    master_seed: int = 0
    episode_id: int = 0

    def __post_init__(self):
        if self.shots < 1:
            raise ValueError("shots must be >= 1")
        if self.n_dim < 1:
            raise ValueError("n_dim must be >= 1")

    @property
    def sentence_len(self) -> int:
        return self.game.sentence_len or (self.n_dim + 1)

    def seed_path(self) -> SeedPath:
        return SeedPath(self.master_seed, (f"episode/{self.episode_id}",))

    def with_episode(self, episode_id: int) -> "EpisodeConfig":
        return replace(self, episode_id=episode_id)


@dataclass(frozen=True)
class VocabPermutation:
    """Bijection on tokens 1..|V| with the EoS token 0 held fixed."""

    mapping: tuple[int, ...]  # mapping[token] = permuted token

    def __post_init__(self):
        if not self.mapping or self.mapping[0] != 0:
            raise ValueError("permutation must fix the EoS token 0")
        if sorted(self.mapping) != list(range(len(self.mapping))):
            raise ValueError("mapping must be a bijection on 0..|V|")

    @property
    def vocab_size(self) -> int:
        return len(self.mapping) - 1

    @classmethod
    def identity(cls, vocab_size: int) -> "VocabPermutation":
        return cls(tuple(range(vocab_size + 1)))

    @classmethod
    def sample(cls, vocab_size: int, rng: np.random.Generator) -> "VocabPermutation":
        perm = 1 + rng.permutation(vocab_size)
        return cls((0,) + tuple(int(t) for t in perm))

    def inverse(self) -> "VocabPermutation":
        inv = [0] * len(self.mapping)
        for token, image in enumerate(self.mapping):
            inv[image] = token
        return VocabPermutation(tuple(inv))


def apply_permutation(perm: VocabPermutation, tokens: Sequence[int]) -> tuple[int, ...]:
    """Relabel every token through the permutation (EoS stays 0)."""
    out = []
    for t in tokens:
        t = int(t)
        if not 0 <= t < len(perm.mapping):
            raise ValueError(f"token {t} outside vocabulary 0..{perm.vocab_size}")
        out.append(perm.mapping[t])
    return tuple(out)


@dataclass(frozen=True)
class StepRecord:
    """One trace line: everything observable about a single env step."""

    episode: int
    phase: str
    shot: int
    game: int
    round: int
    target: Latent
    target_index: int | None
    candidates: tuple[Latent, ...]
    message: tuple[int, ...]
    token: int
    decision: int
    reward: float
    correct: bool | None

    def to_dict(self) -> dict:
        return {
            "type": "step",
            "episode": self.episode,
            "phase": self.phase,
            "shot": self.shot,
            "game": self.game,
            "round": self.round,
            "target": list(self.target),
            "target_index": self.target_index,
            "candidates": [list(c) for c in self.candidates],
            "message": list(self.message),
            "token": self.token,
            "decision": self.decision,
            "reward": float(self.reward),
            "correct": self.correct,
        }


@dataclass(frozen=True)
class EpisodeSummary:
    episode: int
    structure: tuple[int, ...]
    train_accuracies: tuple[float, ...]  # one entry per training shot
    zsct_accuracy: float
    train_games: int
    test_games: int

    def to_dict(self) -> dict:
        return {
            "episode": self.episode,
            "structure": list(self.structure),
            "train_accuracies": [float(a) for a in self.train_accuracies],
            "zsct_accuracy": float(self.zsct_accuracy),
            "train_games": self.train_games,
            "test_games": self.test_games,
        }


class EpisodeState:
    """Mutable episode driver; all randomness comes from labelled sub-streams."""

    def __init__(self, config: EpisodeConfig):
        self.config = config
        path = config.seed_path()
        self.structure: SemanticStructure = sample_structure(
            derive_rng(path.child("structure")), config.n_dim, config.v_min, config.v_max
        )
        self.codebook: ScsCodebook = build_codebook(
            self.structure, derive_rng(path.child("codebook"))
        )
        space = enumerate_space(self.structure)
        self.split: ZsctSplit = make_zsct_split(
            space, config.holdout_fraction, derive_rng(path.child("split")),
            structure=self.structure,
        )
        if config.permute_vocab:
            self.permutation = VocabPermutation.sample(
                config.game.vocab_size, derive_rng(path.child("perm"))
            )
        else:
            self.permutation = VocabPermutation.identity(config.game.vocab_size)

        self._path = path
        self._games_rng = derive_rng(path.child("games"))
        self.phase = PHASE_TRAIN
        self.shot = 1
        self.game_index = 0
        self.schedule: list[Latent] = self._make_schedule()
        self._view_pool: dict[Latent, list[np.ndarray]] = {}
        self.train_correct = [0] * config.shots
        self.train_total = [0] * config.shots
        self.test_correct = 0
        self.test_total = 0
        self.current: GameState | None = self._new_game(self.schedule[0])

    # -- schedule / phase machinery -------------------------------------------------

    def _make_schedule(self) -> list[Latent]:
        if self.phase == PHASE_TRAIN:
            bucket, label = self.split.train, f"schedule/train/{self.shot}"
        else:
            bucket, label = self.split.test, "schedule/test"
        rng = derive_rng(self._path.child(label))
        order = rng.permutation(len(bucket))
        return [bucket[int(i)] for i in order]

    def _bucket(self) -> tuple[Latent, ...]:
        return self.split.train if self.phase == PHASE_TRAIN else self.split.test

    def _extra_pool(self) -> tuple[Latent, ...]:
        # Tiny test buckets may borrow train distractors; train games never
        # see held-out combinations, so their games get no top-up source.
        return () if self.phase == PHASE_TRAIN else self.split.train

    def _sample_view(self, latent: Latent) -> np.ndarray:
        # Per-shot pool capped at O views per latent; O=1 pins one shared view.
        pool = self._view_pool.setdefault(latent, [])
        if len(pool) < self.config.game.o_samples:
            view = sample_scs(self.codebook, latent, self._games_rng)
            pool.append(view)
            return view
        if len(pool) == 1:
            return pool[0]
        return pool[int(self._games_rng.integers(len(pool)))]

    def _new_game(self, target: Latent) -> GameState:
        return new_game(
            self._games_rng,
            self._bucket(),
            target,
            self.codebook,
            self.config.game,
            view_fn=self._sample_view,
            extra_pool=self._extra_pool(),
        )

    def _advance(self) -> None:
        self.game_index += 1
        if self.game_index < len(self.schedule):
            self.current = self._new_game(self.schedule[self.game_index])
            return
        if self.phase == PHASE_TRAIN and self.shot < self.config.shots:
            self.shot += 1
        elif self.phase == PHASE_TRAIN:
            self.phase = PHASE_TEST
            self.shot = 1
        else:
            self.phase = PHASE_DONE
            self.current = None
            return
        self.game_index = 0
        self.schedule = self._make_schedule()
        self._view_pool = {}
        self.current = self._new_game(self.schedule[0])

    @property
    def done(self) -> bool:
        return self.phase == PHASE_DONE

    # -- message pipeline -------------------------------------------------------------

    def _ensure_message(self, speaker) -> None:
        game = self.current
        uttered_rounds = len(game.message) // self.config.sentence_len
        if uttered_rounds >= game.round:
            return
        raw = speaker.speak(speaker_view(game))
        tokens = self._frame_sentence(raw)
        permuted = apply_permutation(self.permutation, tokens)
        game.message = game.message + permuted

    def _frame_sentence(self, raw: Sequence[int]) -> tuple[int, ...]:
        tokens = [int(t) for t in raw]
        limit = self.config.game.vocab_size
        for t in tokens:
            if not 0 <= t <= limit:
                raise ValueError(f"speaker token {t} outside vocabulary 0..{limit}")
        if len(tokens) > self.config.sentence_len:
            raise ValueError(
                f"speaker sentence of {len(tokens)} tokens exceeds length {self.config.sentence_len}"
            )
        tokens += [0] * (self.config.sentence_len - len(tokens))
        return tuple(tokens)

    # -- stepping ----------------------------------------------------------------------

    def current_observation(self, speaker) -> ListenerObservation:
        if self.done:
            raise EpisodeDoneError("episode is done")
        self._ensure_message(speaker)
        return listener_view(self.current, self.config.game)

    def env_step(
        self, speaker, action: ListenerAction
    ) -> tuple[ListenerObservation | None, float, bool, StepRecord]:
        """Apply one listener action; returns (next obs, reward, episode done, record).

        Communication turns (round < rounds) accept only no-op decisions and
        pay zero reward; the decision turn resolves the game and moves the
        schedule forward, reshuffling at shot boundaries.
        """
        if self.done:
            raise EpisodeDoneError("episode is done")
        self._ensure_message(speaker)
        game = self.current
        base = dict(
            episode=self.config.episode_id,
            phase=self.phase,
            shot=self.shot,
            game=self.game_index,
            round=game.round,
            target=game.target,
            target_index=game.target_index,
            candidates=game.candidates,
            token=int(action.token),
        )

        if game.round < self.config.game.rounds:
            if action.decision != NO_OP:
                raise IllegalActionError(
                    "communication turn: decision must be no-op until the decision turn"
                )
            game.listener_tokens.append(int(action.token))
            game.round += 1
            record = StepRecord(
                message=game.message, decision=NO_OP, reward=0.0, correct=None, **base
            )
            return self.current_observation(speaker), 0.0, False, record

        reward, correct, _outcome = resolve_decision(game, action, self.config.game)
        game.listener_tokens.append(int(action.token))
        if self.phase == PHASE_TRAIN:
            self.train_total[self.shot - 1] += 1
            self.train_correct[self.shot - 1] += int(correct)
        else:
            self.test_total += 1
            self.test_correct += int(correct)
        record = StepRecord(
            message=game.message,
            decision=int(action.decision),
            reward=float(reward),
            correct=bool(correct),
            **base,
        )
        self._advance()
        obs = None if self.done else self.current_observation(speaker)
        return obs, float(reward), self.done, record


def begin_episode(config: EpisodeConfig) -> EpisodeState:
    """Sample everything an episode needs and stage the first game."""
    return EpisodeState(config)


def episode_config_from_dict(base: EpisodeConfig, overrides: dict) -> EpisodeConfig:
    """Apply a flat override mapping onto an episode config.

    Keys matching :class:`GameConfig` fields update the embedded game
    config; the rest must match :class:`EpisodeConfig` fields.
    """
    episode_fields = {f.name for f in EpisodeConfig.__dataclass_fields__.values()}
    game_fields = {f.name for f in GameConfig.__dataclass_fields__.values()}
    episode_kw = {}
    game_kw = {}
    for key, value in overrides.items():
        if key in game_fields:
            game_kw[key] = value
        elif key in episode_fields and key != "game":
            episode_kw[key] = value
        else:
            raise ValueError(f"unknown config key {key!r}")
    game = replace(base.game, **game_kw) if game_kw else base.game
    return replace(base, game=game, **episode_kw)


def episode_summary(state: EpisodeState) -> EpisodeSummary:
    """Per-shot train accuracies plus ZSCT accuracy over the test shot only."""
    if not state.done:
        raise NotDoneError("episode summary requires a finished episode")
    train_acc = tuple(
        c / t if t else 0.0 for c, t in zip(state.train_correct, state.train_total)
    )
    zsct = state.test_correct / state.test_total if state.test_total else 0.0
    return EpisodeSummary(
        episode=state.config.episode_id,
        structure=state.structure.dims,
        train_accuracies=train_acc,
        zsct_accuracy=zsct,
        train_games=sum(state.train_total),
        test_games=state.test_total,
    )
