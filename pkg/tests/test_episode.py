"""Meta-episode orchestration: schedules, permutation, stepping, determinism."""

from __future__ import annotations

from collections import Counter

import numpy as np
import pytest

from metarg.agents import PosdisSpeaker
from metarg.episode import (
    EpisodeConfig,
    VocabPermutation,
    apply_permutation,
    begin_episode,
    episode_config_from_dict,
    episode_summary,
)
from metarg.errors import EpisodeDoneError, IllegalActionError, NotDoneError
from metarg.refgame import NO_OP, GameConfig, ListenerAction


class FixedListener:
    """Always picks the given index at decision turns; no-ops otherwise."""

    def __init__(self, index: int = 0):
        self.index = index

    def decide(self, obs):
        if not obs.decision_turn:
            return ListenerAction(token=0, decision=NO_OP)
        return ListenerAction(token=0, decision=self.index)


def _drive(config: EpisodeConfig, listener=None):
    state = begin_episode(config)
    speaker = PosdisSpeaker(config.game.vocab_size, config.sentence_len)
    listener = listener or FixedListener()
    records = []
    while not state.done:
        obs = state.current_observation(speaker)
        action = listener.decide(obs)
        _, _, _, record = state.env_step(speaker, action)
        records.append(record)
    return state, records


def test_permutation_type():
    identity = VocabPermutation.identity(5)
    assert identity.mapping == (0, 1, 2, 3, 4, 5)
    perm = VocabPermutation.sample(5, np.random.default_rng(0))
    assert perm.mapping[0] == 0
    assert sorted(perm.mapping) == list(range(6))
    with pytest.raises(ValueError):
        VocabPermutation((1, 0, 2))  # must fix EoS
    with pytest.raises(ValueError):
        VocabPermutation((0, 2, 2))  # not a bijection


def test_apply_permutation_examples():
    identity = VocabPermutation.identity(5)
    assert apply_permutation(identity, [1, 2, 3, 0]) == (1, 2, 3, 0)
    swap = VocabPermutation((0, 2, 1, 3, 4, 5))
    assert apply_permutation(swap, [1, 2, 3, 0]) == (2, 1, 3, 0)
    perm = VocabPermutation.sample(8, np.random.default_rng(3))
    tokens = (5, 1, 0, 7)
    assert apply_permutation(perm.inverse(), apply_permutation(perm, tokens)) == tokens
    with pytest.raises(ValueError):
        apply_permutation(identity, [9])


def test_episode_game_count_arithmetic():
    # (5,5,5) forced: 2 shots x 100 train + 25 test = 225 decisions.
    config = EpisodeConfig(v_min=5, v_max=5, shots=2, master_seed=1)
    state, records = _drive(config)
    assert state.structure.dims == (5, 5, 5)
    decisions = [r for r in records if r.correct is not None]
    assert len(decisions) == 225
    assert sum(1 for r in decisions if r.phase == "train") == 200
    assert sum(1 for r in decisions if r.phase == "test") == 25


def test_schedule_completeness():
    config = EpisodeConfig(shots=3, master_seed=5)
    state, records = _drive(config)
    train = Counter()
    test = Counter()
    for r in records:
        if r.correct is None:
            continue
        (train if r.phase == "train" else test)[r.target] += 1
    assert set(train) == set(state.split.train)
    assert all(v == 3 for v in train.values())
    assert set(test) == set(state.split.test)
    assert all(v == 1 for v in test.values())


def test_identity_permutation_when_disabled():
    config = EpisodeConfig(permute_vocab=False, master_seed=2)
    state = begin_episode(config)
    assert state.permutation.mapping == tuple(range(config.game.vocab_size + 1))


def test_same_seed_reproduces_episode():
    config = EpisodeConfig(master_seed=7, episode_id=3)
    a = begin_episode(config)
    b = begin_episode(config)
    assert a.structure == b.structure
    assert a.split == b.split
    assert a.permutation == b.permutation
    for i in range(a.structure.n_dim):
        np.testing.assert_array_equal(a.codebook.mus[i], b.codebook.mus[i])
        np.testing.assert_array_equal(a.codebook.sigmas[i], b.codebook.sigmas[i])


def test_determinism_bit_identical_records():
    config = EpisodeConfig(master_seed=13)
    _, records_a = _drive(config)
    _, records_b = _drive(config)
    assert [r.to_dict() for r in records_a] == [r.to_dict() for r in records_b]


def test_permutation_toggle_changes_messages_not_ground_truth():
    base = EpisodeConfig(master_seed=21, permute_vocab=True)
    off = EpisodeConfig(master_seed=21, permute_vocab=False)
    _, with_perm = _drive(base)
    _, without = _drive(off)
    assert len(with_perm) == len(without)
    changed = 0
    for a, b in zip(with_perm, without):
        assert a.target == b.target
        assert a.candidates == b.candidates
        assert a.target_index == b.target_index
        assert a.reward == b.reward
        changed += a.message != b.message
    assert changed > 0


def test_reward_only_at_decision_turns():
    config = EpisodeConfig(shots=1, game=GameConfig(rounds=3), master_seed=4)
    state, records = _drive(config)
    for r in records:
        if r.round < 3:
            assert r.reward == 0.0
            assert r.correct is None
            assert r.decision == NO_OP
        else:
            assert r.correct is not None


def test_communication_turn_rejects_decisions():
    config = EpisodeConfig(shots=1, game=GameConfig(rounds=2), master_seed=4)
    state = begin_episode(config)
    speaker = PosdisSpeaker(config.game.vocab_size, config.sentence_len)
    state.current_observation(speaker)
    with pytest.raises(IllegalActionError):
        state.env_step(speaker, ListenerAction(token=1, decision=0))


def test_message_is_positional_language_through_permutation():
    config = EpisodeConfig(master_seed=9)
    state = begin_episode(config)
    speaker = PosdisSpeaker(config.game.vocab_size, config.sentence_len)
    obs = state.current_observation(speaker)
    target = state.current.target
    raw = tuple(v + 1 for v in target) + (0,)
    assert obs.message == apply_permutation(state.permutation, raw)


def test_step_after_done_raises():
    config = EpisodeConfig(shots=1, master_seed=11)
    state, _ = _drive(config)
    speaker = PosdisSpeaker(config.game.vocab_size, config.sentence_len)
    with pytest.raises(EpisodeDoneError):
        state.env_step(speaker, ListenerAction(decision=0))
    with pytest.raises(EpisodeDoneError):
        state.current_observation(speaker)


def test_summary_requires_done():
    config = EpisodeConfig(master_seed=1)
    state = begin_episode(config)
    with pytest.raises(NotDoneError):
        episode_summary(state)


def test_summary_counts():
    config = EpisodeConfig(shots=2, v_min=5, v_max=5, master_seed=6)
    state, records = _drive(config)
    summary = episode_summary(state)
    assert summary.train_games == 200
    assert summary.test_games == 25
    assert len(summary.train_accuracies) == 2
    decisions = [r for r in records if r.phase == "test" and r.correct is not None]
    assert summary.zsct_accuracy == sum(r.correct for r in decisions) / len(decisions)


def test_view_pool_o1_shares_one_view_per_shot():
    config = EpisodeConfig(shots=2, game=GameConfig(o_samples=1), master_seed=8)
    state = begin_episode(config)
    speaker = PosdisSpeaker(config.game.vocab_size, config.sentence_len)
    per_shot: dict[tuple, dict] = {}
    while not state.done:
        state.current_observation(speaker)
        game = state.current
        key = (state.phase, state.shot)
        views = per_shot.setdefault(key, {})
        if game.target_index is not None:
            # O=1: speaker and target listener view are the same vector.
            assert game.speaker_view is game.listener_views[game.target_index]
        for cand, view in zip(game.candidates, game.listener_views):
            seen = views.setdefault(cand, view)
            assert seen is view  # one pooled view per latent within a shot
        state.env_step(speaker, ListenerAction(decision=game.target_index))
    # Across shots the pools are re-sampled.
    shot_keys = list(per_shot)
    shared = set(per_shot[shot_keys[0]]) & set(per_shot[shot_keys[1]])
    assert any(
        not np.array_equal(per_shot[shot_keys[0]][c], per_shot[shot_keys[1]][c]) for c in shared
    )


def test_view_pool_o4_first_views_differ():
    config = EpisodeConfig(game=GameConfig(o_samples=4), master_seed=8)
    state = begin_episode(config)
    speaker = PosdisSpeaker(config.game.vocab_size, config.sentence_len)
    state.current_observation(speaker)
    game = state.current
    assert not np.array_equal(game.speaker_view, game.listener_views[game.target_index])


def test_episode_config_from_dict():
    base = EpisodeConfig()
    config = episode_config_from_dict(
        base, {"n_dim": 2, "k_distractors": 5, "permute_vocab": False}
    )
    assert config.n_dim == 2
    assert config.game.k_distractors == 5
    assert not config.permute_vocab
    with pytest.raises(ValueError):
        episode_config_from_dict(base, {"bogus": 1})
