"""Symbolic continuous stimulus codec: gaussian codebooks, sampling, decoding.

Each latent dimension's ``[-1, +1]`` range is partitioned into one section
per value; a codebook assigns every section a gaussian kernel whose mean
lies inside the section and whose spread fits it.  Encoding a latent draws
one kernel sample per dimension, so the vector length depends only on the
number of dimensions, never on the value counts (the one-hot encoding, by
contrast, exposes the value counts through its length).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .semantics import Latent, SemanticStructure

_LOG_2PI = float(np.log(2.0 * np.pi))

# Gaussian spread bounds relative to the section width w: sigma in [w/12, w/6].
SIGMA_LOW_DIV = 12.0
SIGMA_HIGH_DIV = 6.0

REJECTION_CAP = 100


def section_bounds(d: int, v: int) -> tuple[float, float]:
    """Bounds of value section ``v`` when ``[-1, +1]`` is split into ``d`` parts.

    Sections are half-open ``[low, high)`` except the last, which closes at +1.
    """
    if not 0 <= v < d:
        raise ValueError(f"value index {v} out of range for d={d}")
    return (-1.0 + 2.0 * v / d, -1.0 + 2.0 * (v + 1) / d)


def section_index(x: float, d: int) -> int:
    """Containing section of coordinate ``x`` (+1 folds into the last section)."""
    return min(d - 1, max(0, int(np.floor((x + 1.0) * d / 2.0))))


@dataclass(frozen=True)
class ScsCodebook:
    """Per-dimension, per-value gaussian parameters over ``[-1, +1]``.

    ``mus[i][v]`` / ``sigmas[i][v]`` are the kernel mean and spread of value
    ``v`` on dimension ``i``.  Built codebooks keep sigma inside the paper
    range; the type itself only requires sigma >= 0 so tests can construct
    degenerate (zero-spread) kernels.
    """

    structure: SemanticStructure
    mus: tuple[np.ndarray, ...]
    sigmas: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.mus) != self.structure.n_dim or len(self.sigmas) != self.structure.n_dim:
            raise ValueError("codebook arrays must have one entry per dimension")
        for i, d in enumerate(self.structure.dims):
            if len(self.mus[i]) != d or len(self.sigmas[i]) != d:
                raise ValueError(f"dimension {i} needs exactly {d} kernels")
            if np.any(self.mus[i] < -1.0) or np.any(self.mus[i] > 1.0):
                raise ValueError("kernel means must lie in [-1, +1]")
            if np.any(self.sigmas[i] < 0.0):
                raise ValueError("kernel spreads must be non-negative")

    @property
    def n_dim(self) -> int:
        return self.structure.n_dim

    def to_jsonable(self) -> dict:
        """Trace-format payload (floats round-trip exactly via the writer)."""
        return {
            "dims": list(self.structure.dims),
            "mus": [list(map(float, m)) for m in self.mus],
            "sigmas": [list(map(float, s)) for s in self.sigmas],
        }

    @classmethod
    def from_jsonable(cls, payload: dict) -> "ScsCodebook":
        return cls(
            structure=SemanticStructure(tuple(payload["dims"])),
            mus=tuple(np.asarray(m, dtype=float) for m in payload["mus"]),
            sigmas=tuple(np.asarray(s, dtype=float) for s in payload["sigmas"]),
        )


def build_codebook(structure: SemanticStructure, rng: np.random.Generator) -> ScsCodebook:
    """Sample a codebook: mu uniform inside each section, sigma in [w/12, w/6]."""
    mus = []
    sigmas = []
    for d in structure.dims:
        w = 2.0 / d
        lows = -1.0 + w * np.arange(d)
        mu = rng.uniform(lows, lows + w)
        sigma = rng.uniform(w / SIGMA_LOW_DIV, w / SIGMA_HIGH_DIV, size=d)
        mu.flags.writeable = False
        sigma.flags.writeable = False
        mus.append(mu)
        sigmas.append(sigma)
    return ScsCodebook(structure=structure, mus=tuple(mus), sigmas=tuple(sigmas))


def sample_scs(
    codebook: ScsCodebook, latent: Sequence[int], rng: np.random.Generator
) -> np.ndarray:
    """Draw one stimulus vector for ``latent``: coordinate i ~ N(mu, sigma).

    Samples outside ``[-1, +1]`` are rejected and redrawn (cap 100 attempts,
    then clamped), so the in-range gaussian shape is preserved.
    """
    values = codebook.structure.validate_latent(latent)
    out = np.empty(codebook.n_dim)
    for i, v in enumerate(values):
        mu = codebook.mus[i][v]
        sigma = codebook.sigmas[i][v]
        x = rng.normal(mu, sigma)
        attempts = 1
        while not -1.0 <= x <= 1.0 and attempts < REJECTION_CAP:
            x = rng.normal(mu, sigma)
            attempts += 1
        out[i] = min(1.0, max(-1.0, x))
    return out


def sample_scs_batch(
    codebook: ScsCodebook, latents: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Vectorized :func:`sample_scs` for an ``(n, n_dim)`` array of latents.

    Uses the same rejection-then-clamp truncation but a different draw order,
    so it is not stream-compatible with the scalar path.
    """
    latents = np.asarray(latents, dtype=int)
    n, n_dim = latents.shape
    mus = np.empty((n, n_dim))
    sigmas = np.empty((n, n_dim))
    for i in range(n_dim):
        mus[:, i] = codebook.mus[i][latents[:, i]]
        sigmas[:, i] = codebook.sigmas[i][latents[:, i]]
    out = rng.normal(mus, sigmas)
    for _ in range(REJECTION_CAP - 1):
        bad = (out < -1.0) | (out > 1.0)
        if not bad.any():
            break
        out[bad] = rng.normal(mus[bad], sigmas[bad])
    return np.clip(out, -1.0, 1.0)


def encode_ohe(structure: SemanticStructure, latent: Sequence[int]) -> np.ndarray:
    """Block-wise one-hot encoding; length is the sum of value counts."""
    values = structure.validate_latent(latent)
    out = np.zeros(sum(structure.dims), dtype=int)
    offset = 0
    for v, d in zip(values, structure.dims):
        out[offset + v] = 1
        offset += d
    return out


def _log_density(x: float, mus: np.ndarray, sigmas: np.ndarray) -> np.ndarray:
    """Gaussian log-densities of ``x`` under each kernel; sigma=0 is a point mass."""
    with np.errstate(divide="ignore", invalid="ignore"):
        dense = -0.5 * ((x - mus) / sigmas) ** 2 - np.log(sigmas) - 0.5 * _LOG_2PI
    point = np.where(x == mus, np.inf, -np.inf)
    return np.where(sigmas > 0.0, dense, point)


def decode_ml(codebook: ScsCodebook, stimulus: Sequence[float]) -> tuple[Latent, float]:
    """Maximum-likelihood latent of a stimulus vector under the codebook.

    Per dimension, picks the value whose kernel assigns the highest density;
    exact ties resolve to the lowest value index.  Returns the decoded latent
    and its joint log-likelihood.
    """
    x = np.asarray(stimulus, dtype=float)
    if x.shape != (codebook.n_dim,):
        raise ValueError(f"stimulus length {x.shape} does not match n_dim {codebook.n_dim}")
    values = []
    loglik = 0.0
    for i in range(codebook.n_dim):
        logpdf = _log_density(float(x[i]), codebook.mus[i], codebook.sigmas[i])
        v = int(np.argmax(logpdf))
        values.append(v)
        loglik += float(logpdf[v])
    return tuple(values), loglik


@dataclass(frozen=True)
class StructurePosterior:
    """Posterior over the per-dimension value count, for d in {2..v_max}."""

    candidates: np.ndarray  # shape (n_cand,), the candidate d values
    probs: np.ndarray  # shape (n_dim, n_cand), rows sum to 1

    def map_estimate(self) -> tuple[int, ...]:
        """Highest-posterior d per dimension; ties resolve to the lowest d."""
        return tuple(int(self.candidates[int(np.argmax(row))]) for row in self.probs)

    def entropy(self, dim: int) -> float:
        p = self.probs[dim]
        nz = p[p > 0]
        return float(-np.sum(nz * np.log(nz)))


def _candidate_grids(d: int, mu_points: int, sigma_points: int) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint grids: mu over each of the d sections, sigma over [w/12, w/6].

    Returns ``(mu_grid, sigma_grid)`` with shapes ``(d, mu_points)`` and
    ``(sigma_points,)``.
    """
    w = 2.0 / d
    lows = -1.0 + w * np.arange(d)
    offsets = (np.arange(mu_points) + 0.5) * (w / mu_points)
    mu_grid = lows[:, None] + offsets[None, :]
    s_low, s_high = w / SIGMA_LOW_DIV, w / SIGMA_HIGH_DIV
    sigma_grid = s_low + (np.arange(sigma_points) + 0.5) * ((s_high - s_low) / sigma_points)
    return mu_grid, sigma_grid


def _grid_logpdf(xs: np.ndarray, mu_grid: np.ndarray, sigma_grid: np.ndarray) -> np.ndarray:
    """Summed log-densities of ``xs`` over a (mu, sigma) grid of one section."""
    z = (xs[:, None, None] - mu_grid[None, :, None]) / sigma_grid[None, None, :]
    logpdf = -0.5 * z**2 - np.log(sigma_grid)[None, None, :] - 0.5 * _LOG_2PI
    return logpdf.sum(axis=0)


def _logsumexp(a: np.ndarray) -> float:
    m = float(np.max(a))
    if not np.isfinite(m):
        return m
    return m + float(np.log(np.sum(np.exp(a - m))))


class StructureTracker:
    """Incremental posterior over one dimension's value count.

    Maintains, per candidate d and per section, the accumulated grid
    log-densities of all observations assigned to that section, so adding an
    observation is O(grid) and the posterior matches
    :func:`infer_structure` up to float addition order.
    """

    def __init__(self, v_max: int, mu_points: int = 32, sigma_points: int = 16):
        if v_max < 2:
            raise ValueError("v_max must be >= 2")
        self.v_max = v_max
        self.candidates = np.arange(2, v_max + 1)
        self._grid_size = mu_points * sigma_points
        self._grids = {int(d): _candidate_grids(int(d), mu_points, sigma_points) for d in self.candidates}
        self._acc = {
            int(d): np.zeros((int(d), mu_points, sigma_points)) for d in self.candidates
        }
        self._counts = {int(d): np.zeros(int(d), dtype=int) for d in self.candidates}
        self.n_obs = 0

    def add(self, x: float) -> None:
        for d in self._grids:
            mu_grid, sigma_grid = self._grids[d]
            v = section_index(x, d)
            z = (x - mu_grid[v][:, None]) / sigma_grid[None, :]
            self._acc[d][v] += -0.5 * z**2 - np.log(sigma_grid)[None, :] - 0.5 * _LOG_2PI
            self._counts[d][v] += 1
        self.n_obs += 1

    def log_marginals(self) -> np.ndarray:
        """Log marginal likelihood of the observations per candidate d.

        Includes the per-observation value-choice term 1/d; without it the
        sharper kernels of finer partitions (sigma scales with 1/d) would
        make the largest d win on any tightly clustered data.
        """
        out = np.empty(len(self.candidates))
        for k, d in enumerate(self.candidates):
            d = int(d)
            total = -self.n_obs * np.log(d)
            for v in range(d):
                if self._counts[d][v] > 0:
                    total += _logsumexp(self._acc[d][v]) - np.log(self._grid_size)
            out[k] = total
        return out

    def posterior(self) -> np.ndarray:
        if self.n_obs == 0:
            raise ValueError("no observations")
        log_m = self.log_marginals()
        log_m -= np.max(log_m)
        p = np.exp(log_m)
        return p / p.sum()


def infer_structure(
    observations: Sequence[Sequence[float]],
    v_max: int,
    *,
    mu_points: int = 32,
    sigma_points: int = 16,
) -> StructurePosterior:
    """Posterior over each dimension's value count from raw coordinates.

    For every candidate d, each observation contributes the uniform
    value-choice factor 1/d, is assigned to its containing section, and
    each non-empty section contributes the grid-integrated marginal
    likelihood of its points under a uniform (mu, sigma) prior; the prior
    over d itself is uniform on {2..v_max}.  The 1/d factor is the Occam
    term: dropping it makes the sharpest partition win on clustered data.

    Args:
        observations: one list of coordinates per dimension (each non-empty).
        v_max: largest value count considered.
        mu_points: mu grid resolution per section.
        sigma_points: sigma grid resolution.
    """
    if len(observations) == 0:
        raise ValueError("observations are empty")
    candidates = np.arange(2, v_max + 1)
    if len(candidates) == 0:
        raise ValueError("v_max must be >= 2")
    probs = np.empty((len(observations), len(candidates)))
    for i, coords in enumerate(observations):
        xs = np.asarray(coords, dtype=float)
        if xs.size == 0:
            raise ValueError(f"dimension {i} has no observations")
        log_m = np.empty(len(candidates))
        for k, d in enumerate(candidates):
            d = int(d)
            mu_grid, sigma_grid = _candidate_grids(d, mu_points, sigma_points)
            sections = np.minimum(d - 1, np.maximum(0, np.floor((xs + 1.0) * d / 2.0).astype(int)))
            total = -xs.size * np.log(d)
            for v in range(d):
                in_section = xs[sections == v]
                if in_section.size:
                    acc = _grid_logpdf(in_section, mu_grid[v], sigma_grid)
                    total += _logsumexp(acc) - np.log(mu_points * sigma_points)
            log_m[k] = total
        log_m -= np.max(log_m)
        p = np.exp(log_m)
        probs[i] = p / p.sum()
    return StructurePosterior(candidates=candidates, probs=probs)
