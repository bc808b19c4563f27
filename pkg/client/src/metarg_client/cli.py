"""metarg-client command line: roll a baseline policy against a server."""

from __future__ import annotations

import argparse
import json
import sys

from .baselines import run_baseline


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="metarg-client", description=__doc__)
    parser.add_argument("--address", default="127.0.0.1:7421", help="server host:port")
    parser.add_argument("--policy", default="random", choices=["random", "oracle-replay"])
    parser.add_argument("--episodes", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=None, help="trace file to write")
    parser.add_argument("--replay", default=None, help="reference trace for oracle-replay")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    report = run_baseline(
        args.policy,
        args.episodes,
        args.address,
        seed=args.seed,
        out=args.out,
        replay_trace=args.replay,
    )
    print(json.dumps({k: v for k, v in report.items() if k != "summaries"}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
