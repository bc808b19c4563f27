"""Symbolic spaces, seeded stream derivation, and zero-shot compositional splits.

A symbolic space is described by its semantic structure: the tuple of value
counts per latent dimension.  Latent stimuli are plain tuples of 0-indexed
value indices.  All randomness flows through :class:`SeedPath`, a labelled
seed hierarchy mixed with SHA-256 so any sub-stream is reproducible across
machines and process counts without replaying earlier streams.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import SplitInfeasibleError

# A latent stimulus is an ordered tuple of 0-indexed values, one per dimension.
Latent = tuple[int, ...]

_MASTER_SEED_MAX = 2**64


@dataclass(frozen=True)
class SeedPath:
    """A master seed plus an ordered list of text labels naming a sub-stream.

    The mixing function is fixed: SHA-256 over the decimal master seed and
    the stream labels joined with ``/``.  The digest seeds a numpy
    ``SeedSequence``, so identical paths give identical generators on every
    platform, and sibling streams are statistically independent.
    """

    master_seed: int
    stream: tuple[str, ...] = ()

    def __post_init__(self):
        if not 0 <= self.master_seed < _MASTER_SEED_MAX:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "stream", tuple(str(s) for s in self.stream))

    def child(self, *labels: str) -> "SeedPath":
        return SeedPath(self.master_seed, self.stream + tuple(labels))

    def _digest(self) -> bytes:
        material = "|".join([str(self.master_seed), "/".join(self.stream)])
        return hashlib.sha256(material.encode("utf-8")).digest()


def derive_rng(path: SeedPath) -> np.random.Generator:
    """Derive a generator that is a pure function of the seed path."""
    entropy = int.from_bytes(path._digest(), "big")
    return np.random.default_rng(np.random.SeedSequence(entropy))


def seed_fingerprint(path: SeedPath) -> int:
    """First 8 digest bytes as an unsigned 64-bit regression-friendly value."""
    return int.from_bytes(path._digest()[:8], "big")


@dataclass(frozen=True)
class SemanticStructure:
    """The tuple of value counts ``d(i)`` per latent dimension."""

    dims: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if len(self.dims) < 1:
            raise ValueError("structure needs at least one dimension")
        if any(d < 2 for d in self.dims):
            raise ValueError("every dimension needs at least 2 values")

    @property
    def n_dim(self) -> int:
        return len(self.dims)

    @property
    def space_size(self) -> int:
        return math.prod(self.dims)

    def validate_latent(self, latent: Sequence[int]) -> Latent:
        values = tuple(int(v) for v in latent)
        if len(values) != self.n_dim:
            raise ValueError(f"latent has {len(values)} values, expected {self.n_dim}")
        for i, (v, d) in enumerate(zip(values, self.dims)):
            if not 0 <= v < d:
                raise ValueError(f"value {v} out of range for dimension {i} (d={d})")
        return values


def sample_structure(
    rng: np.random.Generator, n_dim: int, v_min: int, v_max: int
) -> SemanticStructure:
    """Draw each ``d(i)`` independently and uniformly from ``{v_min..v_max}``.

    Consumes exactly ``n_dim`` integer draws from ``rng``.
    """
    if n_dim < 1:
        raise ValueError("n_dim must be >= 1")
    if v_min < 2 or v_min > v_max:
        raise ValueError(f"invalid bounds: need 2 <= v_min <= v_max, got [{v_min}, {v_max}]")
    dims = rng.integers(v_min, v_max + 1, size=n_dim)
    return SemanticStructure(tuple(int(d) for d in dims))


def enumerate_space(structure: SemanticStructure) -> list[Latent]:
    """All latent stimuli of the space, in lexicographic order of values."""
    return list(itertools.product(*(range(d) for d in structure.dims)))


@dataclass(frozen=True)
class ZsctSplit:
    """Train/test partition for a zero-shot compositional test.

    Every (dimension, value) still occurs in ``train``; ``test`` holds the
    held-out value combinations.  Both halves keep enumeration order.
    """

    train: tuple[Latent, ...]
    test: tuple[Latent, ...]
    holdout_fraction: float

    @property
    def size(self) -> int:
        return len(self.train) + len(self.test)


def _infer_dims(space: Sequence[Latent]) -> tuple[int, ...]:
    n_dim = len(space[0])
    return tuple(max(s[i] for s in space) + 1 for i in range(n_dim))


def make_zsct_split(
    space: Sequence[Latent],
    holdout_fraction: float,
    rng: np.random.Generator,
    *,
    structure: SemanticStructure | None = None,
) -> ZsctSplit:
    """Hold out ``floor(fraction * |space|)`` stimuli without losing coverage.

    Walks a seeded shuffle of the full space, greedily moving stimuli to the
    test side and rejecting any candidate whose removal would leave some
    (dimension, value) pair with zero train occurrences.  The achieved test
    size may be smaller than requested when coverage caps it.

    Args:
        space: the full enumeration of the symbolic space.
        holdout_fraction: requested test fraction, in (0, 1).
        rng: generator driving the shuffle.
        structure: optional; inferred from ``space`` when omitted.

    Raises:
        SplitInfeasibleError: when no stimulus at all can be held out.
    """
    if not 0.0 < holdout_fraction < 1.0:
        raise ValueError("holdout_fraction must lie strictly between 0 and 1")
    if len(space) < 2:
        raise ValueError("space must contain at least 2 stimuli")
    dims = structure.dims if structure is not None else _infer_dims(space)
    if len(space) != math.prod(dims) or len(set(space)) != len(space):
        raise ValueError("space must be the full duplicate-free enumeration")

    requested = math.floor(holdout_fraction * len(space))
    if requested < 1:
        raise SplitInfeasibleError(
            f"holdout_fraction {holdout_fraction} of {len(space)} stimuli requests an empty test set"
        )

    # counts[i][v] = occurrences of value v on dimension i among train stimuli
    counts = [np.bincount([s[i] for s in space], minlength=d) for i, d in enumerate(dims)]
    test: set[Latent] = set()
    for idx in rng.permutation(len(space)):
        if len(test) == requested:
            break
        cand = space[int(idx)]
        if all(counts[i][v] >= 2 for i, v in enumerate(cand)):
            test.add(cand)
            for i, v in enumerate(cand):
                counts[i][v] -= 1
    if not test:
        raise SplitInfeasibleError("every holdout candidate breaks value coverage")

    train = tuple(s for s in space if s not in test)
    return ZsctSplit(
        train=train,
        test=tuple(s for s in space if s in test),
        holdout_fraction=holdout_fraction,
    )


def coverage_ok(split: ZsctSplit, structure: SemanticStructure) -> bool:
    """Check the split invariant: every (dimension, value) occurs in train."""
    for i, d in enumerate(structure.dims):
        seen = {s[i] for s in split.train}
        if seen != set(range(d)):
            return False
    return True


def iter_values(structure: SemanticStructure) -> Iterable[tuple[int, int]]:
    """All (dimension, value) pairs of a structure."""
    for i, d in enumerate(structure.dims):
        for v in range(d):
            yield i, v
