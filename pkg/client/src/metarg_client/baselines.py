"""Scripted baseline policies and the rollout loop writing server-schema traces.

A policy is any callable ``(obs, rng) -> (token, decision)``; two named
baselines ship: ``random`` (uniform over the legal decisions of the turn)
and ``oracle-replay`` (re-issues actions recorded in a reference trace).
No learner code lives here; plug any callable into :func:`run_baseline`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .env import ClientProtocolError, connect

NO_OP = -1
NO_TARGET = -2

Policy = Callable[[dict, np.random.Generator], tuple[int, int]]


def random_policy(obs: dict, rng: np.random.Generator) -> tuple[int, int]:
    if not obs["decision_turn"]:
        return 0, NO_OP
    options = list(range(obs["n_candidates"]))
    if obs.get("no_target_allowed"):
        options.append(NO_TARGET)
    return 0, int(options[rng.integers(len(options))])


@dataclass
class ReplayPolicy:
    """Replays (token, decision) pairs recorded in a server/in-process trace."""

    actions: dict[int, list[tuple[int, int]]]  # episode -> ordered actions
    master_seed: int
    _cursor: dict[int, int] = None

    def __post_init__(self):
        self._cursor = {k: 0 for k in self.actions}

    @classmethod
    def from_trace(cls, path: str) -> "ReplayPolicy":
        actions: dict[int, list[tuple[int, int]]] = {}
        master_seed = 0
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                if obj.get("type") == "header":
                    master_seed = obj.get("config", {}).get("master_seed", 0)
                elif obj.get("type") == "step":
                    actions.setdefault(obj["episode"], []).append(
                        (obj["token"], obj["decision"])
                    )
        if not actions:
            raise ValueError(f"no step records found in {path}")
        return cls(actions=actions, master_seed=master_seed)

    def for_episode(self, episode: int) -> Policy:
        def policy(obs: dict, rng: np.random.Generator) -> tuple[int, int]:
            i = self._cursor[episode]
            self._cursor[episode] = i + 1
            return self.actions[episode][i]

        return policy


def _record_step(
    episode: int, obs: dict, token: int, decision: int, reward: float, info: dict
) -> dict:
    # Same line schema as the server's StepRecords, minus the ground-truth
    # fields a client cannot observe.
    return {
        "type": "step",
        "episode": episode,
        "phase": obs["phase"],
        "shot": obs["shot"],
        "game": obs["game"],
        "round": obs["round"],
        "message": obs["message"],
        "token": token,
        "decision": decision,
        "reward": reward,
        "correct": info.get("correct"),
    }


def run_baseline(
    policy: str | Policy,
    episodes: int,
    address: str,
    *,
    seed: int = 0,
    out: str | None = None,
    overrides: dict | None = None,
    replay_trace: str | None = None,
) -> dict:
    """Roll the policy over episodes and write a trace consumable by
    ``metarg metrics --traces``.

    Returns an aggregate report with per-episode summaries.  A policy that
    raises mid-episode produces a failed-episode record and the run
    continues, mirroring the server-side batch semantics.
    """
    replay: ReplayPolicy | None = None
    if policy == "random":
        named_policy: Policy = random_policy
    elif policy == "oracle-replay":
        if not replay_trace:
            raise ValueError("oracle-replay needs replay_trace")
        replay = ReplayPolicy.from_trace(replay_trace)
        named_policy = None  # chosen per episode below
    elif callable(policy):
        named_policy = policy
    else:
        raise ValueError(f"unknown policy {policy!r} (expected random, oracle-replay or a callable)")

    lines = []
    header = {
        "type": "header",
        "engine": "client",
        "config": {
            "episodes": episodes,
            "listener": policy if isinstance(policy, str) else "callable",
            "master_seed": replay.master_seed if replay else seed,
            "permute_vocab": None,
            "shots": None,
        },
    }
    summaries = []
    failed = 0
    env = connect(address)
    try:
        episode_ids = sorted(replay.actions)[:episodes] if replay else range(episodes)
        for k in episode_ids:
            rng = np.random.default_rng(seed + k)
            step_policy = replay.for_episode(k) if replay else named_policy
            episode_lines = []
            try:
                obs = env.reset(
                    seed=replay.master_seed if replay else seed, episode=k, overrides=overrides
                )
                done = False
                while not done:
                    token, decision = step_policy(obs, rng)
                    prev = obs
                    obs, reward, done, info = env.step(token, decision)
                    episode_lines.append(
                        _record_step(k, prev, token, decision, reward, info)
                    )
                summaries.append(info["summary"])
                lines.extend(episode_lines)
            except ClientProtocolError:
                raise  # session is dead, nothing to salvage
            except Exception as err:
                failed += 1
                lines.append(
                    {"type": "episode_error", "episode": k, "error": f"{type(err).__name__}: {err}"}
                )
    finally:
        env.close()

    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(header) + "\n")
            for record in lines:
                fh.write(json.dumps(record) + "\n")

    zscts = [s["zsct_accuracy"] for s in summaries]
    return {
        "episodes": len(summaries),
        "failed_episodes": failed,
        "zsct_mean": float(np.mean(zscts)) if zscts else 0.0,
        "summaries": summaries,
    }


def iter_trace_steps(path: str) -> Iterable[dict]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            obj = json.loads(line)
            if obj.get("type") == "step":
                yield obj
