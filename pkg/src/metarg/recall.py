"""Recall task: present every stimulus of a sampled space, query latent values.

Each game has two turns: a presentation turn accepting only no-op, then a
query turn naming one latent dimension whose discrete value for the
just-presented stimulus must be answered.  Only second-shot accuracy counts
for the summary: after one full pass over the space, enough evidence exists
to infer the partition of every dimension.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EpisodeDoneError, IllegalActionError, NotDoneError
from .refgame import NO_OP
from .scs import StructureTracker, build_codebook, encode_ohe, sample_scs, section_index
from .semantics import (
    Latent,
    SeedPath,
    derive_rng,
    enumerate_space,
    sample_structure,
)

MODE_SCS = "scs"
MODE_OHE = "ohe"

PHASE_PRESENT = "present"
PHASE_QUERY = "query"


@dataclass(frozen=True)
class RecallConfig:
    n_dim: int = 3
    v_min: int = 2
    v_max: int = 5
    shots: int = 2
    mode: str = MODE_SCS
    reward_correct: float = 1.0
    reward_incorrect: float = 0.0
    master_seed: int = 0
    episode_id: int = 0

    def __post_init__(self):
        if self.mode not in (MODE_SCS, MODE_OHE):
            raise ValueError(f"mode must be {MODE_SCS!r} or {MODE_OHE!r}")
        if self.shots < 1:
            raise ValueError("shots must be >= 1")

    def seed_path(self) -> SeedPath:
        return SeedPath(self.master_seed, (f"recall/{self.episode_id}",))


@dataclass(frozen=True)
class RecallObservation:
    """Per-turn observation: the stimulus at presentation, the dim at query."""

    phase: str
    shot: int
    game: int
    stimulus: np.ndarray | None  # set on the presentation turn only
    queried_dim: int | None  # set on the query turn only
    n_dim: int

    @property
    def query_onehot(self) -> np.ndarray:
        flag = np.zeros(self.n_dim, dtype=int)
        if self.queried_dim is not None:
            flag[self.queried_dim] = 1
        return flag


class RecallEpisode:
    """Runs shots x full-space presentations with one query per game."""

    def __init__(self, config: RecallConfig):
        self.config = config
        path = config.seed_path()
        self.structure = sample_structure(
            derive_rng(path.child("structure")), config.n_dim, config.v_min, config.v_max
        )
        self.codebook = (
            build_codebook(self.structure, derive_rng(path.child("codebook")))
            if config.mode == MODE_SCS
            else None
        )
        space = enumerate_space(self.structure)
        self._schedules: list[list[Latent]] = []
        for s in range(1, config.shots + 1):
            rng = derive_rng(path.child(f"schedule/{s}"))
            order = rng.permutation(len(space))
            self._schedules.append([space[int(i)] for i in order])
        self._queries_rng = derive_rng(path.child("queries"))
        self._views_rng = derive_rng(path.child("views"))

        self.shot = 1
        self.game_index = 0
        self.phase = PHASE_PRESENT
        self.done = False
        self.shot_correct = [0] * config.shots
        self.shot_total = [0] * config.shots
        self._begin_game()

    def _begin_game(self) -> None:
        self._latent = self._schedules[self.shot - 1][self.game_index]
        self._queried_dim = int(self._queries_rng.integers(self.config.n_dim))
        if self.config.mode == MODE_SCS:
            self._view = sample_scs(self.codebook, self._latent, self._views_rng)
        else:
            self._view = encode_ohe(self.structure, self._latent).astype(float)
        self.phase = PHASE_PRESENT

    def observation(self) -> RecallObservation:
        if self.done:
            raise EpisodeDoneError("recall episode is done")
        if self.phase == PHASE_PRESENT:
            return RecallObservation(
                phase=PHASE_PRESENT,
                shot=self.shot,
                game=self.game_index,
                stimulus=self._view,
                queried_dim=None,
                n_dim=self.config.n_dim,
            )
        return RecallObservation(
            phase=PHASE_QUERY,
            shot=self.shot,
            game=self.game_index,
            stimulus=None,
            queried_dim=self._queried_dim,
            n_dim=self.config.n_dim,
        )

    def step(self, action: int) -> tuple[RecallObservation | None, float, bool, dict]:
        """Advance one turn; answers are scored, out-of-range answers are illegal.

        Returns ``(next obs, reward, done, record)``.
        """
        if self.done:
            raise EpisodeDoneError("recall episode is done")
        if self.phase == PHASE_PRESENT:
            if action != NO_OP:
                raise IllegalActionError("presentation turn accepts only the no-op action")
            self.phase = PHASE_QUERY
            record = self._record(turn=PHASE_PRESENT, answer=NO_OP, reward=0.0, correct=None)
            return self.observation(), 0.0, False, record

        if not 0 <= action < self.config.v_max:
            raise IllegalActionError(
                f"answer {action} outside the action range 0..{self.config.v_max - 1}"
            )
        correct = action == self._latent[self._queried_dim]
        reward = self.config.reward_correct if correct else self.config.reward_incorrect
        self.shot_total[self.shot - 1] += 1
        self.shot_correct[self.shot - 1] += int(correct)
        record = self._record(turn=PHASE_QUERY, answer=action, reward=reward, correct=correct)

        self.game_index += 1
        if self.game_index == len(self._schedules[self.shot - 1]):
            if self.shot < self.config.shots:
                self.shot += 1
                self.game_index = 0
                self._begin_game()
            else:
                self.done = True
        else:
            self._begin_game()
        obs = None if self.done else self.observation()
        return obs, float(reward), self.done, record

    def _record(self, turn: str, answer: int, reward: float, correct: bool | None) -> dict:
        return {
            "type": "step",
            "task": "recall",
            "episode": self.config.episode_id,
            "phase": "train" if self.shot < self.config.shots else "test",
            "shot": self.shot,
            "game": self.game_index,
            "turn": turn,
            "latent": list(self._latent),
            "queried_dim": self._queried_dim,
            "answer": answer,
            "reward": float(reward),
            "correct": correct,
        }


@dataclass(frozen=True)
class RecallSummary:
    episode: int
    structure: tuple[int, ...]
    shot_accuracies: tuple[float, ...]
    second_shot_accuracy: float

    def to_dict(self) -> dict:
        return {
            "episode": self.episode,
            "structure": list(self.structure),
            "shot_accuracies": [float(a) for a in self.shot_accuracies],
            "second_shot_accuracy": float(self.second_shot_accuracy),
        }


def begin_recall_episode(config: RecallConfig) -> RecallEpisode:
    return RecallEpisode(config)


def recall_summary(episode: RecallEpisode) -> RecallSummary:
    """Accuracy per shot; the headline number is the second shot only."""
    if not episode.done:
        raise NotDoneError("recall summary requires a finished episode")
    accs = tuple(
        c / t if t else 0.0 for c, t in zip(episode.shot_correct, episode.shot_total)
    )
    second = accs[1] if len(accs) > 1 else accs[-1]
    return RecallSummary(
        episode=episode.config.episode_id,
        structure=episode.structure.dims,
        shot_accuracies=accs,
        second_shot_accuracy=second,
    )


class OheReader:
    """Deterministic reader for one-hot stimuli; knows the block layout."""

    def __init__(self, dims: tuple[int, ...]):
        self.dims = dims
        self._last: list[int] | None = None

    def observe_present(self, obs: RecallObservation) -> None:
        values = []
        offset = 0
        for d in self.dims:
            block = np.asarray(obs.stimulus[offset : offset + d])
            values.append(int(np.argmax(block)))
            offset += d
        self._last = values

    def answer(self, obs: RecallObservation) -> int:
        return self._last[obs.queried_dim]


class ScsStructureSolver:
    """Infers each dimension's partition online, then reads values off it.

    Accumulates every presented coordinate into per-dimension posteriors
    over the value count; answers with the section index of the queried
    coordinate under the current highest-posterior partition.
    """

    def __init__(self, v_max: int, *, mu_points: int = 32, sigma_points: int = 16):
        self.v_max = v_max
        self._grid = (mu_points, sigma_points)
        self._trackers: list[StructureTracker] | None = None
        self._last: np.ndarray | None = None

    def observe_present(self, obs: RecallObservation) -> None:
        if self._trackers is None:
            self._trackers = [
                StructureTracker(self.v_max, mu_points=self._grid[0], sigma_points=self._grid[1])
                for _ in range(len(obs.stimulus))
            ]
        for tracker, x in zip(self._trackers, obs.stimulus):
            tracker.add(float(x))
        self._last = np.asarray(obs.stimulus, dtype=float)

    def answer(self, obs: RecallObservation) -> int:
        tracker = self._trackers[obs.queried_dim]
        posterior = tracker.posterior()
        d_hat = int(tracker.candidates[int(np.argmax(posterior))])
        return section_index(float(self._last[obs.queried_dim]), d_hat)


class RandomAnswerer:
    """Chance baseline answering uniformly over the full action range."""

    def __init__(self, rng: np.random.Generator, v_max: int):
        self.rng = rng
        self.v_max = v_max

    def observe_present(self, obs: RecallObservation) -> None:
        pass

    def answer(self, obs: RecallObservation) -> int:
        return int(self.rng.integers(self.v_max))


def make_recall_agent(name: str, config: RecallConfig, rng: np.random.Generator, structure=None):
    if name == "reader":
        if config.mode != MODE_OHE:
            raise ValueError("the block reader needs one-hot mode")
        return OheReader(structure.dims)
    if name == "solver":
        return ScsStructureSolver(config.v_max)
    if name == "random":
        return RandomAnswerer(rng, config.v_max)
    raise ValueError(f"unknown recall agent {name!r} (expected reader, solver or random)")


def run_recall_episode(config: RecallConfig, agent) -> tuple[list[dict], RecallSummary]:
    """Drive one full recall episode with the given agent."""
    episode = begin_recall_episode(config)
    records = []
    while not episode.done:
        obs = episode.observation()
        if obs.phase == PHASE_PRESENT:
            agent.observe_present(obs)
            _, _, _, record = episode.step(NO_OP)
        else:
            _, _, _, record = episode.step(int(agent.answer(obs)))
        records.append(record)
    return records, recall_summary(episode)
