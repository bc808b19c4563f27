"""Command-line interface: episode, batch, recall, metrics, serve, validate."""

from __future__ import annotations

import argparse
import json
import sys

from .episode import EpisodeConfig, episode_config_from_dict
from .metrics import (
    LanguageTable,
    bosdis,
    posdis,
    summarize_traces,
    topographic_similarity,
)
from .recall import RecallConfig, make_recall_agent, run_recall_episode, begin_recall_episode
from .runner import RunConfig, _run_episode_state, codebook_record, run_batch
from .traces import TraceWriter, dumps, iter_lines
from . import validate as validation


def _add_episode_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--ndim", type=int, default=None, help="latent dimensions")
    parser.add_argument("--vmin", type=int, default=None, help="minimum values per dimension")
    parser.add_argument("--vmax", type=int, default=None, help="maximum values per dimension")
    parser.add_argument("--shots", type=int, default=None, help="training shots per episode")
    parser.add_argument("--obj-samples", type=int, default=None, help="object-centric views per latent (O)")
    parser.add_argument("--distractors", type=int, default=None, help="distractor count (K)")
    parser.add_argument("--vocab-size", type=int, default=None)
    parser.add_argument("--sentence-len", type=int, default=None)
    parser.add_argument("--holdout", type=float, default=None, help="held-out fraction of the space")
    parser.add_argument("--permute", dest="permute", action="store_true", default=None)
    parser.add_argument("--no-permute", dest="permute", action="store_false")
    parser.add_argument("--descriptive", dest="descriptive", action="store_true", default=None)
    parser.add_argument("--no-descriptive", dest="descriptive", action="store_false")
    parser.add_argument("--target-present-prob", type=float, default=None)
    parser.add_argument("--reward-correct", type=float, default=None)
    parser.add_argument("--reward-incorrect", type=float, default=None)
    parser.add_argument("--reveal-target", action="store_true", default=None)
    parser.add_argument("--rounds", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None, help="master seed")


_FLAG_TO_KEY = {
    "ndim": "n_dim",
    "vmin": "v_min",
    "vmax": "v_max",
    "shots": "shots",
    "obj_samples": "o_samples",
    "distractors": "k_distractors",
    "vocab_size": "vocab_size",
    "sentence_len": "sentence_len",
    "holdout": "holdout_fraction",
    "permute": "permute_vocab",
    "descriptive": "descriptive",
    "target_present_prob": "target_present_prob",
    "reward_correct": "reward_correct",
    "reward_incorrect": "reward_incorrect",
    "reveal_target": "reveal_target_after_decision",
    "rounds": "rounds",
    "seed": "master_seed",
}


def _episode_config(args: argparse.Namespace) -> EpisodeConfig:
    overrides: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            overrides.update(json.load(fh))
    for flag, key in _FLAG_TO_KEY.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    return episode_config_from_dict(EpisodeConfig(), overrides)


def _require_in_process_listener(parser_name: str, listener: str) -> None:
    if listener == "external":
        raise SystemExit(
            f"metarg {parser_name}: external listeners connect over the wire "
            "protocol; start `metarg serve` and drive it with a client"
        )


def _cmd_episode(args: argparse.Namespace) -> int:
    _require_in_process_listener("episode", args.listener)
    config = _episode_config(args)
    state, records, summary = _run_episode_state(config, args.listener, args.speaker)
    if args.out:
        with TraceWriter(args.out) as writer:
            writer.write_header({"episodes": 1, "listener": args.listener, "speaker": args.speaker, **_cfg_dict(config)})
            writer.write_record(codebook_record(config.episode_id, state.codebook))
            for record in records:
                writer.write_record(record.to_dict())
    if args.verbose:
        for record in records:
            print(dumps(record.to_dict()))
    print(dumps(summary.to_dict()))
    return 0


def _cfg_dict(config: EpisodeConfig) -> dict:
    import dataclasses

    return dataclasses.asdict(config)


def _cmd_batch(args: argparse.Namespace) -> int:
    _require_in_process_listener("batch", args.listener)
    run = RunConfig(
        episode=_episode_config(args),
        episodes=args.episodes,
        workers=args.workers,
        out=args.out,
        listener=args.listener,
        speaker=args.speaker,
    )
    summary, _ = run_batch(run)
    print(dumps(summary))
    return 0


def _cmd_recall(args: argparse.Namespace) -> int:
    from .semantics import SeedPath, derive_rng

    seed = args.seed if args.seed is not None else 0
    lines = []
    accs = []
    for k in range(args.episodes):
        config = RecallConfig(
            mode=args.mode,
            v_max=args.vmax if args.vmax is not None else 5,
            shots=args.shots if args.shots is not None else 2,
            master_seed=seed,
            episode_id=k,
        )
        episode = begin_recall_episode(config)
        rng = derive_rng(SeedPath(seed, (f"recall/{k}", "agent")))
        agent = make_recall_agent(args.agent, config, rng, structure=episode.structure)
        records, summary = run_recall_episode(config, agent)
        accs.append(summary.second_shot_accuracy)
        lines.extend(dumps(r) for r in records)
    if args.out:
        with TraceWriter(args.out) as writer:
            writer.write_header(
                {"task": "recall", "mode": args.mode, "agent": args.agent, "episodes": args.episodes,
                 "shots": args.shots if args.shots is not None else 2, "listener": args.agent}
            )
            for line in lines:
                writer.write_line(line)
    mean = sum(accs) / len(accs)
    print(dumps({"episodes": args.episodes, "mode": args.mode, "agent": args.agent,
                 "second_shot_accuracy_mean": mean}))
    return 0


def _cmd_metrics(args: argparse.Namespace) -> int:
    if args.table:
        pairs = []
        with open(args.table, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                left, _, right = line.partition(";")
                latent = tuple(int(v) for v in left.split(","))
                tokens = tuple(int(t) for t in right.split())
                pairs.append((latent, tokens))
        table = LanguageTable.from_pairs(pairs)
        top = topographic_similarity(table)
        pos = posdis(table)
        bos = bosdis(table)
        print(dumps({
            "rows": table.n_rows,
            "topsim": {"value": top.value, "degenerate": top.degenerate},
            "posdis": {"value": pos.value, "degenerate": pos.degenerate},
            "bosdis": {"value": bos.value, "degenerate": bos.degenerate},
        }))
        return 0
    if args.traces:
        print(dumps(summarize_traces(iter_lines(args.traces))))
        return 0
    print("metrics needs --table or --traces", file=sys.stderr)
    return 2


def _cmd_serve(args: argparse.Namespace) -> int:
    from .protocol import serve_protocol

    run = RunConfig(
        episode=_episode_config(args),
        out=args.out,
        listener="external",
        speaker=args.speaker,
        bind=args.bind,
    )
    server = serve_protocol(run)
    host, port = server.server_address[:2]
    print(f"serving on {host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else 0
    results = validation.run_all(seed)
    failed = 0
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        print(f"[{status}] {result.name}: {result.detail}")
        failed += 0 if result.passed else 1
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="metarg", description=__doc__)
    parser.add_argument("--config", default=None, help="JSON config file; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)

    p_episode = sub.add_parser("episode", help="run one episode verbosely")
    _add_episode_flags(p_episode)
    p_episode.add_argument("--listener", default="oracle", choices=["oracle", "cheat", "random", "external"])
    p_episode.add_argument("--speaker", default="posdis", choices=["posdis", "cheat"])
    p_episode.add_argument("--out", default=None)
    p_episode.add_argument("--verbose", action="store_true")
    p_episode.set_defaults(func=_cmd_episode)

    p_batch = sub.add_parser("batch", help="run many episodes over workers")
    _add_episode_flags(p_batch)
    p_batch.add_argument("--episodes", type=int, default=10)
    p_batch.add_argument("--workers", type=int, default=1)
    p_batch.add_argument("--listener", default="oracle", choices=["oracle", "cheat", "random", "external"])
    p_batch.add_argument("--speaker", default="posdis", choices=["posdis", "cheat"])
    p_batch.add_argument("--out", default=None)
    p_batch.set_defaults(func=_cmd_batch)

    p_recall = sub.add_parser("recall", help="run the latent-value recall task")
    p_recall.add_argument("--episodes", type=int, default=10)
    p_recall.add_argument("--mode", default="scs", choices=["scs", "ohe"])
    p_recall.add_argument("--agent", default="solver", choices=["reader", "solver", "random"])
    p_recall.add_argument("--shots", type=int, default=None)
    p_recall.add_argument("--vmax", type=int, default=None)
    p_recall.add_argument("--seed", type=int, default=None)
    p_recall.add_argument("--out", default=None)
    p_recall.set_defaults(func=_cmd_recall)

    p_metrics = sub.add_parser("metrics", help="compositionality metrics / trace summaries")
    p_metrics.add_argument("--table", default=None, help="CSV rows 'l1,l2,...;t1 t2 ...'")
    p_metrics.add_argument("--traces", default=None, help="trace file to aggregate")
    p_metrics.set_defaults(func=_cmd_metrics)

    p_serve = sub.add_parser("serve", help="serve episodes to external listeners")
    _add_episode_flags(p_serve)
    p_serve.add_argument("--bind", default="127.0.0.1:7421")
    p_serve.add_argument("--speaker", default="posdis", choices=["posdis", "cheat"])
    p_serve.add_argument("--out", default=None)
    p_serve.set_defaults(func=_cmd_serve)

    p_validate = sub.add_parser("validate", help="run the statistical invariant suite")
    p_validate.add_argument("--seed", type=int, default=None)
    p_validate.set_defaults(func=_cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
