"""Wire protocol server hosting episodes for external listener agents.

Newline-delimited JSON over TCP, one message per line.  Session flow:
``hello`` handshake, then any number of ``reset``/``act`` exchanges; every
``act`` answers exactly one ``obs``.  Observation vectors are rendered with
17 significant digits so clients round-trip doubles bit-exactly.  A
protocol violation gets an ``error`` message and closes the session.
"""

from __future__ import annotations

import socketserver
import threading

from .agents import make_speaker
from .episode import EpisodeState, begin_episode, episode_config_from_dict, episode_summary
from .errors import EngineError, IllegalActionError
from .refgame import ListenerAction, ListenerObservation
from .runner import RunConfig, codebook_record
from .traces import ENGINE_VERSION, dumps, header_line, loads

PROTOCOL_VERSION = 1


def _obs_message(state: EpisodeState, obs: ListenerObservation) -> dict:
    return {
        "type": "obs",
        "phase": state.phase,
        "shot": state.shot,
        "game": state.game_index,
        "round": obs.round,
        "decision_turn": obs.decision_turn,
        "n_candidates": obs.n_candidates,
        "no_target_allowed": obs.no_target_allowed,
        "message": list(obs.message),
        "views": [list(map(float, v)) for v in obs.views],
    }


class _TraceSink:
    """Synchronized append-only sink; one block per finished episode."""

    def __init__(self, path: str | None, config: dict):
        self._lock = threading.Lock()
        self._fh = None
        if path:
            self._fh = open(path, "w", encoding="utf-8", newline="\n")
            self._fh.write(header_line(config) + "\n")
            self._fh.flush()

    def write_block(self, lines: list[str]) -> None:
        if self._fh is None:
            return
        with self._lock:
            for line in lines:
                self._fh.write(line + "\n")
            self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()


class _SessionHandler(socketserver.StreamRequestHandler):
    """One client session: independent episode state, strict alternation."""

    def send(self, message: dict) -> None:
        self.wfile.write((dumps(message) + "\n").encode("utf-8"))
        self.wfile.flush()

    def fail(self, reason: str, detail: str = "") -> None:
        self.send({"type": "error", "reason": reason, "detail": detail})

    def read(self) -> dict | None:
        line = self.rfile.readline()
        if not line:
            return None
        return loads(line.decode("utf-8"))

    def handle(self) -> None:
        run: RunConfig = self.server.run_config
        try:
            msg = self.read()
            if msg is None:
                return
            if msg.get("type") != "hello":
                self.fail("protocol-violation", "expected hello")
                return
            if msg.get("version") != PROTOCOL_VERSION:
                self.fail(
                    "version-mismatch",
                    f"server speaks version {PROTOCOL_VERSION}, client sent {msg.get('version')!r}",
                )
                return
            self.send(
                {
                    "type": "hello",
                    "version": PROTOCOL_VERSION,
                    "engine": ENGINE_VERSION,
                    "actions": {
                        "token_low": 0,
                        "token_high": run.episode.game.vocab_size,
                        "no_op": -1,
                        "no_target": -2,
                        "candidates": run.episode.game.k_distractors + 1,
                    },
                }
            )
            self._session_loop(run)
        except (ConnectionError, BrokenPipeError):
            pass

    def _session_loop(self, run: RunConfig) -> None:
        state: EpisodeState | None = None
        speaker = None
        pending_obs = False
        episode_lines: list[str] = []

        while True:
            msg = self.read()
            if msg is None:
                return
            kind = msg.get("type")

            if kind == "reset":
                overrides = msg.get("config") or {}
                try:
                    config = episode_config_from_dict(run.episode, overrides)
                    if "seed" in msg:
                        config = episode_config_from_dict(
                            config, {"master_seed": int(msg["seed"])}
                        )
                    if "episode" in msg:
                        config = config.with_episode(int(msg["episode"]))
                    state = begin_episode(config)
                    speaker = make_speaker(
                        run.speaker, config.game.vocab_size, config.sentence_len
                    )
                except (EngineError, ValueError, TypeError) as err:
                    self.fail("bad-reset", str(err))
                    return
                episode_lines = [
                    dumps(codebook_record(state.config.episode_id, state.codebook))
                ]
                self.send(_obs_message(state, state.current_observation(speaker)))
                pending_obs = True

            elif kind == "act":
                if state is None or not pending_obs:
                    self.fail("protocol-violation", "act without a pending observation")
                    return
                try:
                    token = int(msg["token"])
                    decision = int(msg["decision"])
                except (KeyError, TypeError, ValueError):
                    self.fail("protocol-violation", "act needs integer token and decision")
                    return
                try:
                    obs, reward, done, record = state.env_step(
                        speaker, ListenerAction(token=token, decision=decision)
                    )
                except IllegalActionError as err:
                    phase = "decision" if state.current_observation(speaker).decision_turn else "communication"
                    self.fail("illegal-action", f"{err} (phase: {phase} turn)")
                    return
                except EngineError as err:
                    self.fail("engine-error", str(err))
                    return
                episode_lines.append(dumps(record.to_dict()))
                result = {
                    "type": "result",
                    "reward": float(reward),
                    "correct": record.correct,
                    "game_done": record.correct is not None,
                }
                if state.config.game.reveal_target_after_decision and record.correct is not None:
                    truth = record.target_index if record.target_index is not None else -2
                    result["ground_truth"] = truth
                self.send(result)
                if done:
                    self.server.trace_sink.write_block(episode_lines)
                    episode_lines = []
                    self.send({"type": "summary", **episode_summary(state).to_dict()})
                    pending_obs = False
                    state = None
                else:
                    self.send(_obs_message(state, obs))
                    pending_obs = True

            else:
                self.fail("protocol-violation", f"unexpected message type {kind!r}")
                return


class ProtocolServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, run: RunConfig):
        host, _, port = (run.bind or "127.0.0.1:7421").rpartition(":")
        super().__init__((host or "127.0.0.1", int(port)), _SessionHandler)
        self.run_config = run
        config = run.resolved()
        config["listener"] = "external"
        self.trace_sink = _TraceSink(run.out, config)

    def server_close(self) -> None:
        super().server_close()
        self.trace_sink.close()


def serve_protocol(run: RunConfig) -> ProtocolServer:
    """Bind the server; callers run ``serve_forever`` (or use a thread)."""
    return ProtocolServer(run)
