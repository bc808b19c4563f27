"""Episode driver and multi-worker batch runner.

Episode k of a run is seeded by the labelled stream ``episode/k`` under the
master seed, so results are independent of worker count and episodes can be
reproduced without replaying their predecessors.  The batch writer emits
per-episode line blocks in episode order, making trace files byte-identical
across worker counts.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .agents import make_listener, make_speaker
from .episode import EpisodeConfig, EpisodeState, begin_episode, episode_summary
from .errors import VocabTooSmallError
from .refgame import NO_TARGET
from .semantics import derive_rng
from .traces import TraceWriter, dumps, header_line
from . import metrics


@dataclass(frozen=True)
class RunConfig:
    """A batch: base episode config plus execution and agent selection."""

    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    episodes: int = 1
    workers: int = 1
    out: str | None = None
    listener: str = "oracle"
    speaker: str = "posdis"
    bind: str | None = None

    def __post_init__(self):
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def resolved(self) -> dict:
        config = dataclasses.asdict(self.episode)
        config["episodes"] = self.episodes
        config["workers"] = self.workers
        config["listener"] = self.listener
        config["speaker"] = self.speaker
        return config


def drive_episode(state: EpisodeState, speaker, listener):
    """Run one episode to completion with in-process agents.

    Listeners may implement two optional hooks: ``observe_game`` (diagnostic
    ground-truth candidates, oracle only) and ``observe_outcome`` (feedback
    after each decision; the ground truth index is passed only when the
    reveal flag is set).
    """
    records = []
    reveal = state.config.game.reveal_target_after_decision
    wants_truth = getattr(listener, "wants_ground_truth", False)
    has_outcome = hasattr(listener, "observe_outcome")
    while not state.done:
        obs = state.current_observation(speaker)
        if wants_truth and obs.decision_turn:
            listener.observe_game(state.current.candidates)
        action = listener.decide(obs)
        _, _, _, record = state.env_step(speaker, action)
        records.append(record)
        if record.correct is not None and has_outcome:
            revealed = None
            if reveal:
                revealed = record.target_index if record.target_index is not None else NO_TARGET
            listener.observe_outcome(obs, action, record.correct, revealed)
    return records, episode_summary(state)


def _run_episode_state(config: EpisodeConfig, listener: str, speaker: str):
    if speaker == "posdis" and config.game.vocab_size < config.v_max:
        raise VocabTooSmallError(
            f"positional speaker needs vocab_size >= v_max "
            f"({config.game.vocab_size} < {config.v_max})"
        )
    state = begin_episode(config)
    speaker_agent = make_speaker(speaker, config.game.vocab_size, config.sentence_len)
    listener_rng = derive_rng(config.seed_path().child("listener"))
    listener_agent = make_listener(
        listener, listener_rng, state.structure.dims, config.game.vocab_size
    )
    records, summary = drive_episode(state, speaker_agent, listener_agent)
    return state, records, summary


def run_episode(config: EpisodeConfig, listener: str = "oracle", speaker: str = "posdis"):
    """Convenience wrapper building the named agents for one episode."""
    _, records, summary = _run_episode_state(config, listener, speaker)
    return records, summary


def codebook_record(episode_id: int, codebook) -> dict:
    """Trace line exposing an episode's codebook for post-hoc analysis."""
    return {"type": "codebook", "episode": episode_id, **codebook.to_jsonable()}


def _run_one(args: tuple[RunConfig, int]) -> tuple[int, list[str], str | None]:
    run, k = args
    try:
        state, records, _ = _run_episode_state(
            run.episode.with_episode(k), run.listener, run.speaker
        )
        lines = [dumps(codebook_record(k, state.codebook))]
        lines += [dumps(r.to_dict()) for r in records]
        return k, lines, None
    except Exception as err:  # failed episodes are recorded, not fatal
        return k, [], f"{type(err).__name__}: {err}"


def run_batch(run: RunConfig) -> tuple[dict, list[str]]:
    """Run all episodes, optionally write the trace file, and summarize it.

    Returns ``(summary, lines)`` where the summary is exactly
    :func:`metrics.summarize_traces` applied to the produced lines.
    """
    jobs = [(run, k) for k in range(run.episodes)]
    if run.workers == 1:
        results = map(_run_one, jobs)
    else:
        pool = ProcessPoolExecutor(max_workers=run.workers)
        results = pool.map(_run_one, jobs)

    blocks: dict[int, list[str]] = {}
    for k, lines, error in results:
        if error is not None:
            lines = [dumps({"type": "episode_error", "episode": k, "error": error})]
        blocks[k] = lines
    if run.workers > 1:
        pool.shutdown()

    all_lines = [header_line(run.resolved())]
    for k in range(run.episodes):
        all_lines.extend(blocks[k])

    if run.out:
        with TraceWriter(run.out) as writer:
            for line in all_lines:
                writer.write_line(line)

    summary = metrics.summarize_traces(all_lines)
    return summary, all_lines
