"""Built-in reference agents.

The positional speaker utters one token per latent dimension (value index
plus one, EoS-terminated), giving a perfectly position-disentangled
language.  The oracle listener is an environment-validation agent: it is
granted the ground-truth candidate latents of the current game and solves
the per-episode token/value binding problem by constraint propagation,
giving the engine a provable accuracy upper bound.  The cheat pair encodes
raw stimulus coordinates like an analog-to-digital converter, ignoring the
semantic structure entirely; the vocabulary permutation exists to defeat
exactly this strategy.
"""

from __future__ import annotations

import numpy as np

from .errors import CodebookMismatchError, VocabTooSmallError
from .refgame import (
    NO_OP,
    NO_TARGET,
    ListenerAction,
    ListenerObservation,
    SpeakerObservation,
)
from .semantics import Latent


def posdis_speak(latent: Latent, vocab_size: int, sentence_len: int) -> tuple[int, ...]:
    """Positional encoding: token at position i is ``l(i) + 1``, then EoS."""
    needed = max(latent) + 1
    if needed > vocab_size:
        raise VocabTooSmallError(
            f"value {needed - 1} needs token {needed} but vocabulary ends at {vocab_size}"
        )
    if len(latent) + 1 > sentence_len:
        raise ValueError(
            f"{len(latent)} content tokens plus EoS do not fit in sentence length {sentence_len}"
        )
    tokens = tuple(v + 1 for v in latent)
    return tokens + (0,) * (sentence_len - len(tokens))


class PosdisSpeaker:
    """Rule-based speaker with a fully positional compositional language."""

    def __init__(self, vocab_size: int, sentence_len: int):
        self.vocab_size = vocab_size
        self.sentence_len = sentence_len

    def speak(self, obs: SpeakerObservation) -> tuple[int, ...]:
        return posdis_speak(obs.latent, self.vocab_size, self.sentence_len)


def quantize_coordinate(x: float, vocab_size: int) -> int:
    """Analog-to-digital token for a coordinate: uniform bins over [-1, +1].

    Token k (1-based) covers ``[-1 + 2(k-1)/|V|, -1 + 2k/|V|)``; +1 folds
    into the last bin.
    """
    b = int(np.floor((x + 1.0) * vocab_size / 2.0))
    return min(vocab_size - 1, max(0, b)) + 1


def bin_center(token: int, vocab_size: int) -> float:
    """Center of the quantization bin addressed by a (1-based) token."""
    return -1.0 + (2.0 * token - 1.0) / vocab_size


class CheatSpeaker:
    """Digitizes the raw stimulus vector; never touches the semantic structure."""

    def __init__(self, vocab_size: int, sentence_len: int):
        self.vocab_size = vocab_size
        self.sentence_len = sentence_len

    def speak(self, obs: SpeakerObservation) -> tuple[int, ...]:
        if len(obs.stimulus) + 1 > self.sentence_len:
            raise ValueError("stimulus does not fit in the sentence length")
        tokens = tuple(quantize_coordinate(float(x), self.vocab_size) for x in obs.stimulus)
        return tokens + (0,) * (self.sentence_len - len(tokens))


class CheatListener:
    """Inverts analog tokens to bin centers and picks the nearest candidate view."""

    def __init__(self, vocab_size: int):
        self.vocab_size = vocab_size

    def decide(self, obs: ListenerObservation) -> ListenerAction:
        n_dim = len(obs.views[0])
        content = obs.message[:n_dim]
        decoded = np.array(
            [bin_center(t, self.vocab_size) if t > 0 else 0.0 for t in content]
        )
        dists = [float(np.linalg.norm(np.asarray(v) - decoded)) for v in obs.views]
        return ListenerAction(token=0, decision=int(np.argmin(dists)))


class RandomListener:
    """Chance baseline: uniform over the legal decisions of the turn."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def decide(self, obs: ListenerObservation) -> ListenerAction:
        if not obs.decision_turn:
            return ListenerAction(token=0, decision=NO_OP)
        options = list(range(obs.n_candidates))
        if obs.no_target_allowed:
            options.append(NO_TARGET)
        return ListenerAction(token=0, decision=int(options[self.rng.integers(len(options))]))


class OracleListener:
    """Constraint-propagation listener validating the binding machinery.

    Maintains, per message position, the set of latent values each token may
    still encode.  Ground-truth candidate latents arrive through the
    diagnostic :meth:`observe_game` hook (in-process runs only; the wire
    protocol never exposes them), so the residual problem the oracle solves
    is exactly the token/value binding the benchmark instantiates.
    """

    wants_ground_truth = True

    def __init__(self, rng: np.random.Generator, dims: tuple[int, ...]):
        self.rng = rng
        self.dims = dims
        # Per position: token -> set of still-possible values; claimed value -> token.
        self._sets: list[dict[int, set[int]]] = [dict() for _ in dims]
        self._claimed: list[dict[int, int]] = [dict() for _ in dims]
        self._candidates: tuple[Latent, ...] | None = None

    # -- diagnostic environment hooks ---------------------------------------------

    def observe_game(self, candidates: tuple[Latent, ...]) -> None:
        self._candidates = candidates

    # -- bookkeeping -----------------------------------------------------------------

    def _values_for(self, pos: int, token: int) -> set[int]:
        sets = self._sets[pos]
        if token not in sets:
            taken = set(self._claimed[pos].keys())
            sets[token] = set(range(self.dims[pos])) - taken
        return sets[token]

    def _confirm(self, pos: int, token: int, value: int) -> None:
        current = self._values_for(pos, token)
        if value not in current:
            raise CodebookMismatchError(
                f"position {pos}: token {token} confirmed to {value}, "
                f"inconsistent with remaining set {sorted(current)}"
            )
        self._sets[pos][token] = {value}
        owner = self._claimed[pos].get(value)
        if owner is not None and owner != token:
            raise CodebookMismatchError(
                f"position {pos}: value {value} already bound to token {owner}"
            )
        self._claimed[pos][value] = token
        # Injectivity: no other token on this position can encode the value.
        for other, values in self._sets[pos].items():
            if other != token and value in values:
                values.discard(value)
                if len(values) == 1:
                    self._confirm(pos, other, next(iter(values)))

    def _is_confirmed(self, pos: int, token: int, value: int) -> bool:
        return self._sets[pos].get(token) == {value}

    def _bind_all(self, message: tuple[int, ...], latent: Latent) -> None:
        for pos, value in enumerate(latent):
            self._confirm(pos, message[pos], value)

    # -- acting ------------------------------------------------------------------------

    def decide(self, obs: ListenerObservation) -> ListenerAction:
        if not obs.decision_turn:
            return ListenerAction(token=0, decision=NO_OP)
        if self._candidates is None:
            raise CodebookMismatchError("oracle stepped without its ground-truth hook")
        content = obs.message[: len(self.dims)]
        consistent = [
            idx
            for idx, cand in enumerate(self._candidates)
            if all(cand[pos] in self._values_for(pos, content[pos]) for pos in range(len(self.dims)))
        ]
        if not consistent:
            if obs.no_target_allowed and self._fully_bound(content):
                return ListenerAction(token=0, decision=NO_TARGET)
            consistent = list(range(len(self._candidates)))
        pick = consistent[int(self.rng.integers(len(consistent)))]
        return ListenerAction(token=0, decision=int(pick))

    def _fully_bound(self, content: tuple[int, ...]) -> bool:
        return all(len(self._values_for(pos, t)) == 1 for pos, t in enumerate(content))

    def observe_outcome(
        self,
        obs: ListenerObservation,
        action: ListenerAction,
        correct: bool,
        revealed: int | None = None,
    ) -> None:
        """Learn from the resolution.

        ``revealed`` is the ground-truth decision (only supplied when the
        reveal diagnostic is enabled); otherwise only the correctness of the
        own pick is available.
        """
        if self._candidates is None:
            return
        content = obs.message[: len(self.dims)]
        if revealed is not None:
            if revealed >= 0:
                self._bind_all(content, self._candidates[revealed])
        elif correct and action.decision >= 0:
            self._bind_all(content, self._candidates[action.decision])
        elif not correct and action.decision >= 0:
            self._prune_wrong(content, self._candidates[action.decision])
        self._candidates = None

    def _prune_wrong(self, content: tuple[int, ...], cand: Latent) -> None:
        # A wrong pick falsifies the conjunction; prune only when all but one
        # position is already confirmed to match, which pins the mismatch.
        unconfirmed = [
            pos for pos in range(len(self.dims)) if not self._is_confirmed(pos, content[pos], cand[pos])
        ]
        if len(unconfirmed) != 1:
            return
        pos = unconfirmed[0]
        values = self._values_for(pos, content[pos])
        values.discard(cand[pos])
        if len(values) == 1:
            self._confirm(pos, content[pos], next(iter(values)))


def make_speaker(name: str, vocab_size: int, sentence_len: int):
    if name == "posdis":
        return PosdisSpeaker(vocab_size, sentence_len)
    if name == "cheat":
        return CheatSpeaker(vocab_size, sentence_len)
    raise ValueError(f"unknown speaker {name!r} (expected posdis or cheat)")


def make_listener(name: str, rng: np.random.Generator, dims: tuple[int, ...], vocab_size: int):
    if name == "oracle":
        return OracleListener(rng, dims)
    if name == "cheat":
        return CheatListener(vocab_size)
    if name == "random":
        return RandomListener(rng)
    raise ValueError(f"unknown listener {name!r} (expected oracle, cheat or random)")
