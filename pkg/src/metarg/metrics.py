"""Compositionality and accuracy metrics over language tables and traces.

Entropies and mutual informations are plug-in estimates from empirical
counts, in nats; the tables produced by this engine enumerate spaces
exhaustively, where plug-in estimation is exact.  Degenerate inputs
(constant languages, constant distance vectors) yield flagged zero results
instead of silent values.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .errors import MalformedTraceError
from .semantics import Latent


@dataclass(frozen=True)
class MetricResult:
    value: float
    degenerate: bool = False


@dataclass(frozen=True)
class LanguageTable:
    """Rows of (latent stimulus, message tokens) over one structure."""

    rows: tuple[tuple[Latent, tuple[int, ...]], ...]

    def __post_init__(self):
        if self.rows:
            n_dim = len(self.rows[0][0])
            if any(len(latent) != n_dim for latent, _ in self.rows):
                raise ValueError("all rows must share one structure")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[Sequence[int], Sequence[int]]]) -> "LanguageTable":
        return cls(
            tuple((tuple(int(v) for v in latent), tuple(int(t) for t in msg)) for latent, msg in pairs)
        )

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_dim(self) -> int:
        return len(self.rows[0][0])


def message_content(tokens: Sequence[int]) -> tuple[int, ...]:
    """Tokens before the first EoS; EoS and padding are framing, not content."""
    out = []
    for t in tokens:
        if t == 0:
            break
        out.append(int(t))
    return tuple(out)


def levenshtein(a: Sequence[int], b: Sequence[int]) -> int:
    """Classic edit distance with unit insert/delete/substitute costs."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        current = [i]
        for j, y in enumerate(b, start=1):
            cost = 0 if x == y else 1
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost))
        previous = current
    return previous[-1]


def hamming(a: Sequence[int], b: Sequence[int]) -> int:
    return sum(1 for x, y in zip(a, b) if x != y)


def entropy(values: Sequence) -> float:
    """Plug-in entropy in nats of an empirical sample."""
    counts = np.array(list(Counter(values).values()), dtype=float)
    p = counts / counts.sum()
    return float(-np.sum(p * np.log(p)))


def mutual_information(xs: Sequence, ys: Sequence) -> float:
    """Plug-in mutual information in nats between two paired samples."""
    n = len(xs)
    joint = Counter(zip(xs, ys))
    px = Counter(xs)
    py = Counter(ys)
    mi = 0.0
    for (x, y), c in joint.items():
        p_xy = c / n
        mi += p_xy * math.log(p_xy * n * n / (px[x] * py[y]))
    return max(0.0, mi)


def topographic_similarity(table: LanguageTable) -> MetricResult:
    """Spearman correlation of pairwise meaning vs message distances.

    Meaning distance is Hamming over latent values; message distance is
    Levenshtein over content tokens.  Constant distance vectors make rank
    correlation undefined and are flagged.
    """
    if table.n_rows < 2:
        raise ValueError("topographic similarity needs at least 2 rows")
    contents = [message_content(msg) for _, msg in table.rows]
    meaning_d = []
    message_d = []
    for i, j in itertools.combinations(range(table.n_rows), 2):
        meaning_d.append(hamming(table.rows[i][0], table.rows[j][0]))
        message_d.append(levenshtein(contents[i], contents[j]))
    if len(set(meaning_d)) < 2 or len(set(message_d)) < 2:
        return MetricResult(0.0, degenerate=True)
    rho = stats.spearmanr(meaning_d, message_d).statistic
    return MetricResult(float(rho))


def _disentanglement_gap(channel: Sequence, attributes: list[Sequence]) -> float | None:
    """(top MI - second MI) / H(channel); None when the channel is constant."""
    h = entropy(channel)
    if h <= 0.0:
        return None
    mis = sorted((mutual_information(channel, attr) for attr in attributes), reverse=True)
    top = mis[0]
    second = mis[1] if len(mis) > 1 else 0.0
    return (top - second) / h


def _attribute_columns(table: LanguageTable) -> list[Sequence]:
    return [[latent[i] for latent, _ in table.rows] for i in range(table.n_dim)]


def posdis(table: LanguageTable) -> MetricResult:
    """Positional disentanglement: per-position MI gap, averaged.

    Operates on content tokens (EoS excluded); messages must share one
    content length for positions to be comparable.
    """
    if table.n_rows == 0:
        raise ValueError("posdis needs a non-empty table")
    contents = [message_content(msg) for _, msg in table.rows]
    lengths = {len(c) for c in contents}
    if len(lengths) != 1:
        raise ValueError("posdis needs equal content lengths across messages")
    length = lengths.pop()
    attributes = _attribute_columns(table)
    scores = []
    for pos in range(length):
        symbols = [c[pos] for c in contents]
        gap = _disentanglement_gap(symbols, attributes)
        if gap is not None:
            scores.append(gap)
    if not scores:
        return MetricResult(0.0, degenerate=True)
    return MetricResult(float(np.mean(scores)))


def bosdis(table: LanguageTable) -> MetricResult:
    """Bag-of-symbols disentanglement: per-symbol count MI gap, averaged."""
    if table.n_rows == 0:
        raise ValueError("bosdis needs a non-empty table")
    contents = [message_content(msg) for _, msg in table.rows]
    vocab = sorted({t for c in contents for t in c})
    attributes = _attribute_columns(table)
    scores = []
    for symbol in vocab:
        counts = [c.count(symbol) for c in contents]
        gap = _disentanglement_gap(counts, attributes)
        if gap is not None:
            scores.append(gap)
    if not scores:
        return MetricResult(0.0, degenerate=True)
    return MetricResult(float(np.mean(scores)))


def reconstruction_accuracy(
    predicted: Sequence[float], truth: Sequence[float], threshold: float = 0.05
) -> tuple[np.ndarray, float]:
    """Per-dimension closeness flags (inclusive threshold) and their mean."""
    pred = np.asarray(predicted, dtype=float)
    true = np.asarray(truth, dtype=float)
    if pred.shape != true.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {true.shape}")
    flags = np.abs(pred - true) <= threshold
    return flags, float(flags.mean())


# -- trace aggregation ---------------------------------------------------------------


_GROUP_FIELDS = ("o_samples", "shots", "k_distractors", "permute_vocab", "listener")


def _group_key(config: dict) -> tuple:
    game = config.get("game", {})
    return (
        game.get("o_samples", config.get("o_samples")),
        config.get("shots"),
        game.get("k_distractors", config.get("k_distractors")),
        config.get("permute_vocab"),
        config.get("listener"),
    )


@dataclass
class _EpisodeTally:
    test_correct: int = 0
    test_total: int = 0
    train_correct: dict = None
    train_total: dict = None

    def __post_init__(self):
        self.train_correct = {}
        self.train_total = {}


def summarize_traces(lines: Iterable[str], *, bootstrap: int = 1000) -> dict:
    """Aggregate a trace stream into per-configuration accuracy reports.

    Groups episodes by (O, S, K, permutation flag, listener) taken from the
    header lines; reports mean ZSCT accuracy with a 95% bootstrap interval,
    per-shot train accuracies, and failed-episode counts.

    Raises:
        MalformedTraceError: on unparseable lines or steps without a header.
    """
    import json

    groups: dict[tuple, dict] = {}
    current: dict | None = None

    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as err:
            raise MalformedTraceError(lineno, f"invalid JSON ({err.msg})") from err
        if not isinstance(obj, dict) or "type" not in obj:
            raise MalformedTraceError(lineno, "expected an object with a 'type' field")

        kind = obj["type"]
        if kind == "header":
            config = obj.get("config")
            if not isinstance(config, dict):
                raise MalformedTraceError(lineno, "header is missing its config object")
            key = _group_key(config)
            current = groups.setdefault(
                key,
                {
                    "key": dict(zip(_GROUP_FIELDS, key)),
                    "episodes": {},
                    "failed_episodes": 0,
                    "steps": 0,
                },
            )
        elif kind == "step":
            if current is None:
                raise MalformedTraceError(lineno, "step record before any header")
            try:
                episode = obj["episode"]
                phase = obj["phase"]
                shot = obj["shot"]
                correct = obj["correct"]
            except KeyError as err:
                raise MalformedTraceError(lineno, f"step record missing {err}") from err
            current["steps"] += 1
            if correct is None:
                continue
            tally = current["episodes"].setdefault(episode, _EpisodeTally())
            if phase == "test":
                tally.test_total += 1
                tally.test_correct += int(bool(correct))
            else:
                tally.train_total[shot] = tally.train_total.get(shot, 0) + 1
                tally.train_correct[shot] = tally.train_correct.get(shot, 0) + int(bool(correct))
        elif kind == "episode_error":
            if current is None:
                raise MalformedTraceError(lineno, "error record before any header")
            current["failed_episodes"] += 1
        elif kind == "codebook":
            if current is None:
                raise MalformedTraceError(lineno, "codebook record before any header")
        else:
            raise MalformedTraceError(lineno, f"unknown record type {kind!r}")

    reports = []
    for key, group in sorted(groups.items(), key=lambda kv: str(kv[0])):
        tallies = [t for t in group["episodes"].values() if t.test_total > 0]
        zsct = np.array([t.test_correct / t.test_total for t in tallies])
        shots = sorted({s for t in tallies for s in t.train_total})
        train_means = []
        for s in shots:
            accs = [
                t.train_correct.get(s, 0) / t.train_total[s]
                for t in tallies
                if t.train_total.get(s)
            ]
            train_means.append(float(np.mean(accs)) if accs else 0.0)
        report = {
            "key": group["key"],
            "episodes": len(tallies),
            "failed_episodes": group["failed_episodes"],
            "steps": group["steps"],
            "zsct_mean": float(zsct.mean()) if zsct.size else 0.0,
            "zsct_ci95": _bootstrap_ci(zsct, bootstrap),
            "train_shot_means": train_means,
        }
        reports.append(report)
    return {"groups": reports}


def _bootstrap_ci(values: np.ndarray, resamples: int) -> list[float]:
    if values.size == 0:
        return [0.0, 0.0]
    rng = np.random.default_rng(0)
    means = rng.choice(values, size=(resamples, values.size), replace=True).mean(axis=1)
    lo, hi = np.percentile(means, [2.5, 97.5])
    return [float(lo), float(hi)]
