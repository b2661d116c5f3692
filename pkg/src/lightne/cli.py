"""Command-line front end.

Subcommands: convert, embed, eval, tune.  Success prints a JSON result to
stdout and exits 0; failures print one JSON error object to stderr and exit
nonzero.  --threads beats the LIGHTNE_THREADS environment variable, which
beats the config and hardware default; --seed overrides the config seed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .errors import LightneError
from .pipeline import (
    convert_edge_list,
    load_run_config,
    run_embed,
    run_eval,
    run_tune,
)


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--threads", type=int, default=None, help="worker thread count")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--config", type=str, default=None, help="run config JSON path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lightne", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_convert = sub.add_parser("convert", help="text edge list to binary graph file")
    p_convert.add_argument("input", help="text edge list ('u v' lines, '#' comments)")
    p_convert.add_argument("output", help="binary graph path")
    p_convert.add_argument("--compress", action="store_true", help="block-compress adjacency")
    _common_flags(p_convert)

    p_embed = sub.add_parser("embed", help="run the embedding pipeline")
    _common_flags(p_embed)

    p_eval = sub.add_parser("eval", help="score an embedding on the config task")
    p_eval.add_argument("--embedding", default=None, help="embedding file (default: config embedding_out)")
    _common_flags(p_eval)

    p_tune = sub.add_parser("tune", help="hyperparameter search on the config task")
    p_tune.add_argument("--budget", type=int, default=20, help="trial count")
    p_tune.add_argument("--best-config-out", default=None, help="path for the winning config")
    p_tune.add_argument("--trial-log", default=None, help="JSON-lines trial log path")
    _common_flags(p_tune)
    return parser


def _load_config(args):
    if not args.config:
        raise LightneError(f"'{args.command}' needs --config")
    cfg = load_run_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, hp=dataclasses.replace(cfg.hp, seed=args.seed))
    if args.threads is not None:
        cfg = dataclasses.replace(cfg, threads=args.threads)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "convert":
            result = convert_edge_list(args.input, args.output, compress=args.compress)
        elif args.command == "embed":
            _, result = run_embed(_load_config(args))
        elif args.command == "eval":
            result = run_eval(_load_config(args), embedding_path=args.embedding)
        elif args.command == "tune":
            cfg = _load_config(args)
            best_cfg, tuned = run_tune(
                cfg,
                args.budget,
                best_config_out=args.best_config_out,
                trial_log_out=args.trial_log,
            )
            result = {
                "best_objective": tuned.best_objective,
                "trials": len(tuned.trials),
                "best_M": best_cfg.hp.M,
                "best_q": best_cfg.hp.q,
                "best_k": best_cfg.hp.k,
            }
        else:  # pragma: no cover
            raise LightneError(f"unknown command {args.command!r}")
    except (LightneError, OSError, ValueError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    json.dump(result, sys.stdout)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
