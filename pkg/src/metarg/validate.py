"""Statistical invariant checks surfaced by the ``validate`` CLI subcommand.

Each check is deterministic given the master seed and returns a pass flag
plus a human-readable detail line; the CLI prints one line per check and
exits non-zero when any fails.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .episode import EpisodeConfig
from .metrics import LanguageTable, posdis
from .agents import posdis_speak
from .refgame import GameConfig
from .scs import build_codebook, decode_ml, sample_scs_batch, section_bounds, encode_ohe
from .semantics import (
    SeedPath,
    SemanticStructure,
    coverage_ok,
    derive_rng,
    enumerate_space,
    make_zsct_split,
    sample_structure,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def check_codebook_invariants(master_seed: int = 0, trials: int = 10_000) -> CheckResult:
    rng = derive_rng(SeedPath(master_seed, ("validate", "codebook")))
    bad = 0
    for _ in range(trials):
        structure = sample_structure(rng, int(rng.integers(1, 5)), 2, 6)
        codebook = build_codebook(structure, rng)
        for i, d in enumerate(structure.dims):
            w = 2.0 / d
            for v in range(d):
                low, high = section_bounds(d, v)
                mu = codebook.mus[i][v]
                sigma = codebook.sigmas[i][v]
                if not (low <= mu < high or (v == d - 1 and mu == 1.0)):
                    bad += 1
                if not (w / 12 <= sigma <= w / 6):
                    bad += 1
    return CheckResult(
        "codebook-invariants",
        bad == 0,
        f"{trials} codebooks, {bad} kernel violations",
    )


def check_split_coverage(master_seed: int = 0, trials: int = 1000) -> CheckResult:
    rng = derive_rng(SeedPath(master_seed, ("validate", "split")))
    failures = 0
    for _ in range(trials):
        structure = sample_structure(rng, 3, 2, 5)
        split = make_zsct_split(enumerate_space(structure), 0.2, rng, structure=structure)
        if not coverage_ok(split, structure) or not split.test:
            failures += 1
    return CheckResult("zsct-coverage", failures == 0, f"{trials} splits, {failures} failures")


def check_structure_marginals(master_seed: int = 0, draws: int = 100_000) -> CheckResult:
    rng = derive_rng(SeedPath(master_seed, ("validate", "marginals")))
    dims = np.array([sample_structure(rng, 3, 2, 5).dims for _ in range(draws // 3)])
    p = 0.25
    sigma = np.sqrt(p * (1 - p) / dims.shape[0])
    worst = 0.0
    for v in (2, 3, 4, 5):
        freq = (dims == v).mean(axis=0)
        worst = max(worst, float(np.max(np.abs(freq - p))))
    return CheckResult(
        "structure-marginals",
        worst <= 3 * sigma,
        f"worst |freq-0.25| = {worst:.4f}, 3-sigma bound {3 * sigma:.4f}",
    )


def check_shape_invariance() -> CheckResult:
    rng = derive_rng(SeedPath(7, ("validate", "shape")))
    small = SemanticStructure((2, 2, 2))
    large = SemanticStructure((5, 5, 5))
    scs_small = sample_scs_batch(build_codebook(small, rng), np.zeros((1, 3), dtype=int), rng)
    scs_large = sample_scs_batch(build_codebook(large, rng), np.zeros((1, 3), dtype=int), rng)
    ohe_small = encode_ohe(small, (0, 0, 0))
    ohe_large = encode_ohe(large, (0, 0, 0))
    ok = (
        scs_small.shape[1] == scs_large.shape[1] == 3
        and len(ohe_small) == 6
        and len(ohe_large) == 15
    )
    return CheckResult(
        "shape-invariance",
        ok,
        f"scs lengths {scs_small.shape[1]}/{scs_large.shape[1]}, ohe lengths {len(ohe_small)}/{len(ohe_large)}",
    )


def check_posdis_speaker() -> CheckResult:
    structure = SemanticStructure((5, 5, 5))
    table = LanguageTable.from_pairs(
        (latent, posdis_speak(latent, 10, 4)) for latent in enumerate_space(structure)
    )
    result = posdis(table)
    ok = not result.degenerate and abs(result.value - 1.0) <= 1e-9
    return CheckResult("posdis-speaker", ok, f"posdis = {result.value:.12f}")


def check_sampling_and_decoding(master_seed: int = 0, trials: int = 50) -> CheckResult:
    # Many codebooks: a single one can sit anywhere between ~0.8 (adjacent
    # kernels sharing an edge) and 1.0; the aggregate concentrates near 0.94.
    rng = derive_rng(SeedPath(master_seed, ("validate", "decode")))
    in_range = True
    hits = 0
    total = 0
    for _ in range(trials):
        structure = sample_structure(rng, 3, 2, 5)
        codebook = build_codebook(structure, rng)
        latents = np.stack([rng.integers(0, d, size=100) for d in structure.dims], axis=1)
        views = sample_scs_batch(codebook, latents, rng)
        in_range = in_range and bool(np.all(views >= -1.0) and np.all(views <= 1.0))
        for i in range(views.shape[0]):
            total += 1
            hits += decode_ml(codebook, views[i])[0] == tuple(latents[i])
    rate = hits / total
    return CheckResult(
        "sample-and-decode",
        in_range and rate > 0.85,
        f"samples in range: {in_range}, decode accuracy {rate:.3f} over {trials} codebooks",
    )


def check_target_placement(master_seed: int = 0, episodes: int = 40) -> CheckResult:
    # Chi-square test of target position uniformity across many games.
    from .runner import run_episode

    counts = np.zeros(4, dtype=int)
    for k in range(episodes):
        config = EpisodeConfig(
            shots=1, game=GameConfig(k_distractors=3), master_seed=master_seed, episode_id=k
        )
        records, _ = run_episode(config, listener="random")
        for r in records:
            if r.target_index is not None:
                counts[r.target_index] += 1
    expected = counts.sum() / 4
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    # 99.9% quantile of chi-square with 3 dof.
    return CheckResult(
        "target-placement-uniform",
        chi2 < 16.27,
        f"counts {counts.tolist()}, chi2 = {chi2:.2f} (bound 16.27)",
    )


def run_all(master_seed: int = 0) -> list[CheckResult]:
    return [
        check_codebook_invariants(master_seed),
        check_split_coverage(master_seed),
        check_structure_marginals(master_seed),
        check_shape_invariance(),
        check_posdis_speaker(),
        check_sampling_and_decoding(master_seed),
        check_target_placement(master_seed),
    ]
