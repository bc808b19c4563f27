"""Reset/step environment interface over the metarg wire protocol.

Connects to a running ``metarg serve`` endpoint and maps its
newline-delimited JSON messages onto the conventional RL environment API.
Observation vectors arrive as 17-significant-digit decimals and parse back
to bit-identical doubles.
"""

from __future__ import annotations

import json
import socket
from typing import Any

import numpy as np

PROTOCOL_VERSION = 1


class ClientProtocolError(Exception):
    """Server-reported error or broken message alternation.

    ``payload`` carries the server's error object when one was received.
    """

    def __init__(self, message: str, payload: dict | None = None):
        super().__init__(message)
        self.payload = payload or {}


class ClientEnv:
    """One protocol session exposing reset/step semantics.

    ``reset`` starts an episode on the server; ``step`` sends one
    (token, decision) action and returns ``(obs, reward, done, info)``.
    The terminal step carries the server's episode summary in ``info``.
    """

    def __init__(self, address: tuple[str, int], timeout: float = 30.0):
        self._sock = socket.create_connection(address, timeout=timeout)
        self._rf = self._sock.makefile("r", encoding="utf-8")
        self._wf = self._sock.makefile("w", encoding="utf-8")
        self.action_space: dict = {}
        self.last_obs: dict | None = None
        self._pending_obs = False
        self._hello()

    # -- wire plumbing ---------------------------------------------------------

    def _send(self, message: dict) -> None:
        self._wf.write(json.dumps(message) + "\n")
        self._wf.flush()

    def _recv(self) -> dict:
        line = self._rf.readline()
        if not line:
            raise ClientProtocolError("server closed the connection")
        msg = json.loads(line)
        if msg.get("type") == "error":
            raise ClientProtocolError(
                f"{msg.get('reason')}: {msg.get('detail', '')}", payload=msg
            )
        return msg

    def _hello(self) -> None:
        self._send({"type": "hello", "version": PROTOCOL_VERSION})
        reply = self._recv()
        if reply.get("type") != "hello":
            raise ClientProtocolError(f"expected hello, got {reply.get('type')!r}")
        self.action_space = reply.get("actions", {})

    # -- environment API -------------------------------------------------------

    def reset(
        self, seed: int | None = None, episode: int = 0, overrides: dict | None = None
    ) -> dict:
        message: dict[str, Any] = {"type": "reset", "episode": episode}
        if seed is not None:
            message["seed"] = int(seed)
        if overrides:
            message["config"] = overrides
        self._send(message)
        obs = self._recv()
        if obs.get("type") != "obs":
            raise ClientProtocolError(f"expected obs after reset, got {obs.get('type')!r}")
        obs["views"] = [np.asarray(v, dtype=float) for v in obs["views"]]
        self.last_obs = obs
        self._pending_obs = True
        return obs

    def step(self, token: int, decision: int) -> tuple[dict | None, float, bool, dict]:
        if not self._pending_obs:
            raise ClientProtocolError("step without a pending observation (reset first)")
        self._send({"type": "act", "token": int(token), "decision": int(decision)})
        result = self._recv()
        if result.get("type") != "result":
            raise ClientProtocolError(f"expected result, got {result.get('type')!r}")
        info = {k: v for k, v in result.items() if k not in ("type", "reward")}
        follow = self._recv()
        if follow.get("type") == "summary":
            self._pending_obs = False
            self.last_obs = None
            info["summary"] = {k: v for k, v in follow.items() if k != "type"}
            return None, float(result["reward"]), True, info
        if follow.get("type") != "obs":
            raise ClientProtocolError(f"expected obs or summary, got {follow.get('type')!r}")
        follow["views"] = [np.asarray(v, dtype=float) for v in follow["views"]]
        self.last_obs = follow
        return follow, float(result["reward"]), False, info

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass

    def __enter__(self) -> "ClientEnv":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def connect(address: str | tuple[str, int], timeout: float = 30.0) -> ClientEnv:
    """Open a session against ``host:port`` (string or tuple)."""
    if isinstance(address, str):
        host, _, port = address.rpartition(":")
        address = (host or "127.0.0.1", int(port))
    return ClientEnv(address, timeout=timeout)
