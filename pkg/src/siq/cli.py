"""Command-line surface: exact scores, estimation, baselines, game generation
and benchmark sweeps. Every run echoes its resolved configuration (including
derived quantities such as the sampling order) to stderr; outputs depend only
on flags and input files, except for the wall-clock runtime metric."""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .baselines import kb_fsi, pb_sii, pb_sti
from .errors import SiqError
from .estimator import shapiq_estimate
from .exact import exact_cii_representation
from .games import load_game, save_game, soum_random
from .harness import ExperimentConfig, run_budget_sweep, write_csv, write_jsonl
from .weights import FSI_TOP, SCHEME_SHAPLEY_KERNEL, SCHEME_SII_TAIL, SII, STI, SV

INDEX_FLAGS = {"sii": SII, "sti": STI, "fsi": FSI_TOP, "sv": SV}
BASELINE_FLAGS = {"pb-sii": pb_sii, "pb-sti": pb_sti, "kb-fsi": kb_fsi}

# Protocol defaults: evaluation budget 2^14, kernel scheme, top-10 ranking.
DEFAULT_BUDGET = 2**14
DEFAULT_TOP_K = 10
DEFAULT_INSTANCES = 50


def _echo(payload: dict) -> None:
    print(json.dumps({"resolved": payload}, sort_keys=True), file=sys.stderr)


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2)
    if out in (None, "-"):
        print(text)
    else:
        with open(out, "w") as fh:
            fh.write(text + "\n")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("game_file", help="JSON game file (tabular or sum-of-unanimity)")
    p.add_argument(
        "--index",
        choices=sorted(INDEX_FLAGS),
        default="sii",
        help="interaction index to compute (default: sii)",
    )
    p.add_argument(
        "--order",
        type=int,
        default=2,
        help="maximum interaction order s0 (default: 2; forced to 1 for sv)",
    )
    p.add_argument("--out", default=None, help="output path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="siq",
        description="Shapley-based interaction indices: exact scores, "
        "budgeted sampling estimates, baseline estimators and benchmark sweeps.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_exact = sub.add_parser("exact", help="exact scores via one powerset pass")
    _add_common(p_exact)

    p_est = sub.add_parser("estimate", help="budgeted sampling estimate")
    _add_common(p_est)
    p_est.add_argument(
        "--budget",
        type=int,
        default=DEFAULT_BUDGET,
        help=f"model evaluation budget (default: {DEFAULT_BUDGET})",
    )
    p_est.add_argument("--seed", type=int, default=0, help="run seed (default: 0)")
    p_est.add_argument(
        "--scheme",
        choices=[SCHEME_SHAPLEY_KERNEL, SCHEME_SII_TAIL],
        default=SCHEME_SHAPLEY_KERNEL,
        help="size-weight scheme for the sampling plan (default: shapley_kernel)",
    )

    p_base = sub.add_parser("baseline", help="run one baseline estimator")
    p_base.add_argument("game_file")
    p_base.add_argument(
        "--estimator", choices=sorted(BASELINE_FLAGS), required=True
    )
    p_base.add_argument("--order", type=int, default=2)
    p_base.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p_base.add_argument("--seed", type=int, default=0)
    p_base.add_argument("--out", default=None)

    p_gen = sub.add_parser("soum-gen", help="generate a random sum-of-unanimity game")
    p_gen.add_argument("--players", type=int, required=True)
    p_gen.add_argument("--terms", type=int, required=True)
    p_gen.add_argument("--max-order", type=int, default=None,
                       help="largest term size (default: players)")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)

    p_bench = sub.add_parser("bench", help="run a benchmark sweep from a config")
    p_bench.add_argument("config_file")
    p_bench.add_argument("--out-csv", required=True)
    p_bench.add_argument("--out-jsonl", default=None)
    p_bench.add_argument(
        "--workers",
        type=int,
        default=int(os.environ.get("SHAPIQ_WORKERS", "1")),
        help="parallel instance workers (default: $SHAPIQ_WORKERS or 1)",
    )
    return parser


def _resolve_order(args) -> tuple[str, int]:
    kind = INDEX_FLAGS[args.index]
    s0 = 1 if kind == SV else args.order
    return kind, s0


def cmd_exact(args) -> int:
    game = load_game(args.game_file)
    kind, s0 = _resolve_order(args)
    _echo({"command": "exact", "index": kind, "order": s0, "d": game.d})
    scores = exact_cii_representation(game, kind, s0)
    _emit(scores.to_dict(), args.out)
    return 0


def cmd_estimate(args) -> int:
    game = load_game(args.game_file)
    kind, s0 = _resolve_order(args)
    report = shapiq_estimate(
        game, kind, s0, args.budget, scheme=args.scheme, seed=args.seed
    )
    _echo(
        {
            "command": "estimate",
            "index": kind,
            "order": s0,
            "budget": args.budget,
            "scheme": args.scheme,
            "seed": args.seed,
            "k0": report.k0,
            "samples_drawn": report.samples_drawn,
        }
    )
    _emit(report.to_dict(), args.out)
    return 0


def cmd_baseline(args) -> int:
    game = load_game(args.game_file)
    run = BASELINE_FLAGS[args.estimator]
    _echo(
        {
            "command": "baseline",
            "estimator": args.estimator,
            "order": args.order,
            "budget": args.budget,
            "seed": args.seed,
        }
    )
    report = run(game, args.order, args.budget, args.seed)
    _emit(report.to_dict(), args.out)
    return 0


def cmd_soum_gen(args) -> int:
    max_order = args.max_order if args.max_order is not None else args.players
    _echo(
        {
            "command": "soum-gen",
            "players": args.players,
            "terms": args.terms,
            "max_order": max_order,
            "seed": args.seed,
        }
    )
    game = soum_random(args.players, args.terms, args.seed, max_order)
    save_game(game, args.out)
    return 0


def cmd_bench(args) -> int:
    config = ExperimentConfig.from_json(args.config_file)
    _echo({"command": "bench", "workers": args.workers, **config.to_dict()})
    rows = run_budget_sweep(config, workers=args.workers)
    write_csv(rows, args.out_csv)
    if args.out_jsonl:
        write_jsonl(rows, args.out_jsonl)
    return 0


COMMANDS = {
    "exact": cmd_exact,
    "estimate": cmd_estimate,
    "baseline": cmd_baseline,
    "soum-gen": cmd_soum_gen,
    "bench": cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SiqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
