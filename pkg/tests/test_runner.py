"""Batch runner: worker-count invariance, failure recording, CLI wiring."""

from __future__ import annotations

import json

import pytest

from metarg.cli import main
from metarg.episode import EpisodeConfig
from metarg.metrics import summarize_traces
from metarg.refgame import GameConfig
from metarg.runner import RunConfig, run_batch
from metarg.traces import iter_lines, loads


def test_batch_summary_matches_summarize_traces(tmp_path):
    out = str(tmp_path / "t.jsonl")
    run = RunConfig(
        episode=EpisodeConfig(shots=1, master_seed=5),
        episodes=4,
        out=out,
        listener="random",
    )
    summary, lines = run_batch(run)
    assert summary == summarize_traces(iter_lines(out))
    assert summary["groups"][0]["episodes"] == 4


def test_worker_count_invariance(tmp_path):
    out1 = str(tmp_path / "w1.jsonl")
    out8 = str(tmp_path / "w8.jsonl")
    base = EpisodeConfig(shots=1, master_seed=17)
    run_batch(RunConfig(episode=base, episodes=6, workers=1, out=out1, listener="oracle"))
    run_batch(RunConfig(episode=base, episodes=6, workers=8, out=out8, listener="oracle"))
    with open(out1, "rb") as fa, open(out8, "rb") as fb:
        a, b = fa.read(), fb.read()
    # The header embeds the worker count; per-episode content must match.
    a_steps = [l for l in a.decode().splitlines() if '"type":"step"' in l]
    b_steps = [l for l in b.decode().splitlines() if '"type":"step"' in l]
    assert a_steps == b_steps
    assert len(a_steps) > 0


def test_failed_episodes_recorded_not_fatal():
    # n_dim=1 with d=2 gives a 2-point space whose holdout floor is zero;
    # every episode fails with a split error but the batch completes.
    run = RunConfig(
        episode=EpisodeConfig(n_dim=1, v_min=2, v_max=2, master_seed=1),
        episodes=3,
        listener="random",
    )
    summary, lines = run_batch(run)
    errors = [loads(l) for l in lines if '"episode_error"' in l]
    assert len(errors) == 3
    assert summary["groups"][0]["failed_episodes"] == 3
    assert summary["groups"][0]["episodes"] == 0


def test_posdis_speaker_vocab_guard():
    from metarg.errors import VocabTooSmallError
    from metarg.runner import run_episode

    config = EpisodeConfig(v_max=5, game=GameConfig(vocab_size=3))
    with pytest.raises(VocabTooSmallError):
        run_episode(config, listener="random", speaker="posdis")


def test_traces_carry_codebook_records(tmp_path):
    out = str(tmp_path / "cb.jsonl")
    run = RunConfig(
        episode=EpisodeConfig(shots=1, master_seed=2), episodes=2, out=out, listener="random"
    )
    run_batch(run)
    from metarg.scs import ScsCodebook

    codebooks = [loads(l) for l in iter_lines(out) if '"type":"codebook"' in l]
    assert len(codebooks) == 2
    restored = ScsCodebook.from_jsonable(codebooks[0])
    assert restored.n_dim == 3


def test_cli_external_listener_redirects():
    with pytest.raises(SystemExit):
        main(["batch", "--listener", "external", "--episodes", "1"])


def test_cli_batch_and_metrics(tmp_path, capsys):
    out = str(tmp_path / "cli.jsonl")
    code = main(
        [
            "batch",
            "--episodes", "2",
            "--shots", "1",
            "--listener", "oracle",
            "--reveal-target",
            "--seed", "3",
            "--out", out,
        ]
    )
    assert code == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["groups"][0]["zsct_mean"] == 1.0

    code = main(["metrics", "--traces", out])
    assert code == 0
    assert json.loads(capsys.readouterr().out) == printed


def test_cli_metrics_table(tmp_path, capsys):
    table = tmp_path / "lang.csv"
    rows = []
    for a in range(3):
        for b in range(2):
            rows.append(f"{a},{b};{a + 1} {b + 1} 0")
    table.write_text("\n".join(rows), encoding="utf-8")
    assert main(["metrics", "--table", str(table)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["rows"] == 6
    assert report["posdis"]["value"] == pytest.approx(1.0, abs=1e-9)


def test_cli_config_file_with_flag_override(tmp_path, capsys):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"shots": 3, "k_distractors": 2}), encoding="utf-8")
    out = str(tmp_path / "t.jsonl")
    code = main(
        [
            "--config", str(config),
            "batch",
            "--episodes", "1",
            "--shots", "1",  # flag overrides the file
            "--listener", "random",
            "--seed", "0",
            "--out", out,
        ]
    )
    assert code == 0
    header = loads(next(iter_lines(out)))
    assert header["config"]["shots"] == 1
    assert header["config"]["game"]["k_distractors"] == 2


def test_cli_episode_and_validate(capsys):
    assert main(["episode", "--shots", "1", "--seed", "2", "--listener", "random"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert "zsct_accuracy" in summary


def test_cli_recall(tmp_path, capsys):
    out = str(tmp_path / "recall.jsonl")
    code = main(
        ["recall", "--episodes", "2", "--mode", "ohe", "--agent", "reader", "--seed", "1", "--out", out]
    )
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["second_shot_accuracy_mean"] == 1.0
    lines = list(iter_lines(out))
    assert '"task":"recall"' in lines[1]
