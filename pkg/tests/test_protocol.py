"""Wire protocol: handshake, alternation, violations, replay parity."""

from __future__ import annotations

import socket
import threading

import numpy as np
import pytest

from metarg.episode import EpisodeConfig
from metarg.protocol import PROTOCOL_VERSION, serve_protocol
from metarg.refgame import GameConfig
from metarg.runner import RunConfig, run_batch
from metarg.traces import dumps, loads


class Client:
    """Minimal line-oriented test client."""

    def __init__(self, address):
        self.sock = socket.create_connection(address, timeout=10)
        self.rf = self.sock.makefile("r", encoding="utf-8")
        self.wf = self.sock.makefile("w", encoding="utf-8")

    def send(self, message: dict) -> None:
        self.wf.write(dumps(message) + "\n")
        self.wf.flush()

    def recv(self) -> dict:
        line = self.rf.readline()
        assert line, "server closed the connection"
        return loads(line)

    def hello(self) -> dict:
        self.send({"type": "hello", "version": PROTOCOL_VERSION})
        return self.recv()

    def close(self) -> None:
        self.sock.close()


@pytest.fixture
def server(tmp_path):
    run = RunConfig(
        episode=EpisodeConfig(shots=1),
        bind="127.0.0.1:0",
        out=str(tmp_path / "server.jsonl"),
        listener="external",
    )
    srv = serve_protocol(run)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield srv
    srv.shutdown()
    srv.server_close()


def test_handshake_and_action_descriptor(server):
    client = Client(server.server_address)
    hello = client.hello()
    assert hello["type"] == "hello"
    assert hello["version"] == PROTOCOL_VERSION
    assert hello["actions"]["candidates"] == 4
    client.close()


def test_version_mismatch_rejected(server):
    client = Client(server.server_address)
    client.send({"type": "hello", "version": 99})
    reply = client.recv()
    assert reply["type"] == "error"
    assert reply["reason"] == "version-mismatch"
    client.close()


def test_act_before_obs_is_violation(server):
    client = Client(server.server_address)
    client.hello()
    client.send({"type": "act", "token": 0, "decision": 0})
    reply = client.recv()
    assert reply["type"] == "error"
    assert reply["reason"] == "protocol-violation"
    client.close()


def test_full_episode_random_policy(server):
    client = Client(server.server_address)
    client.hello()
    client.send({"type": "reset", "seed": 5, "episode": 0})
    obs = client.recv()
    rng = np.random.default_rng(0)
    rewards = []
    while obs["type"] == "obs":
        assert obs["decision_turn"]
        client.send(
            {"type": "act", "token": 0, "decision": int(rng.integers(obs["n_candidates"]))}
        )
        result = client.recv()
        assert result["type"] == "result"
        rewards.append(result["reward"])
        obs = client.recv()
    assert obs["type"] == "summary"
    assert 0.0 <= obs["zsct_accuracy"] <= 1.0
    assert set(rewards) <= {0.0, 1.0}
    client.close()


def test_reset_determinism_same_first_obs(server):
    views = []
    for _ in range(2):
        client = Client(server.server_address)
        client.hello()
        client.send({"type": "reset", "seed": 123, "episode": 7})
        obs = client.recv()
        views.append(dumps(obs))
        client.close()
    assert views[0] == views[1]


def test_decision_during_communication_turn_names_phase(tmp_path):
    run = RunConfig(
        episode=EpisodeConfig(shots=1, game=GameConfig(rounds=2)),
        bind="127.0.0.1:0",
        listener="external",
    )
    srv = serve_protocol(run)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    try:
        client = Client(srv.server_address)
        client.hello()
        client.send({"type": "reset", "seed": 1})
        obs = client.recv()
        assert not obs["decision_turn"]
        client.send({"type": "act", "token": 0, "decision": 0})
        reply = client.recv()
        assert reply["type"] == "error"
        assert reply["reason"] == "illegal-action"
        assert "communication" in reply["detail"]
        client.close()
    finally:
        srv.shutdown()
        srv.server_close()


def test_oracle_replay_parity(tmp_path):
    """A scripted client replaying recorded oracle actions reproduces the
    in-process StepRecords byte for byte."""
    master_seed = 7001
    episodes = 2
    inproc = str(tmp_path / "inproc.jsonl")
    episode = EpisodeConfig(
        shots=1, game=GameConfig(reveal_target_after_decision=True), master_seed=master_seed
    )
    run_batch(
        RunConfig(episode=episode, episodes=episodes, out=inproc, listener="oracle")
    )
    with open(inproc, encoding="utf-8") as fh:
        reference = [l.rstrip("\n") for l in fh if '"type":"step"' in l]
    actions = [(loads(l)["token"], loads(l)["decision"]) for l in reference]

    served = str(tmp_path / "served.jsonl")
    run = RunConfig(episode=episode, bind="127.0.0.1:0", out=served, listener="external")
    srv = serve_protocol(run)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    try:
        client = Client(srv.server_address)
        client.hello()
        cursor = 0
        for k in range(episodes):
            client.send({"type": "reset", "seed": master_seed, "episode": k})
            message = client.recv()
            while message["type"] == "obs":
                token, decision = actions[cursor]
                cursor += 1
                client.send({"type": "act", "token": token, "decision": decision})
                result = client.recv()
                assert result["type"] == "result"
                message = client.recv()
            assert message["type"] == "summary"
            assert message["zsct_accuracy"] == 1.0
        client.close()
        assert cursor == len(actions)
    finally:
        srv.shutdown()
        srv.server_close()

    with open(served, encoding="utf-8") as fh:
        replayed = [l.rstrip("\n") for l in fh if '"type":"step"' in l]
    assert replayed == reference


def test_sessions_are_isolated(server):
    # Two interleaved sessions with different seeds never mix state.
    a = Client(server.server_address)
    b = Client(server.server_address)
    a.hello()
    b.hello()
    a.send({"type": "reset", "seed": 1, "episode": 0})
    b.send({"type": "reset", "seed": 2, "episode": 0})
    obs_a = a.recv()
    obs_b = b.recv()
    assert dumps(obs_a) != dumps(obs_b)
    a.send({"type": "act", "token": 0, "decision": 0})
    result_a = a.recv()
    assert result_a["type"] == "result"
    b.send({"type": "act", "token": 0, "decision": 1})
    result_b = b.recv()
    assert result_b["type"] == "result"
    a.close()
    b.close()
