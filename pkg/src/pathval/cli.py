"""Command-line entry points.

Subcommands: ``run`` executes a replication experiment from a config file
(with flag overrides), ``gen-data`` writes a synthetic instance and sample
file, ``validate`` applies one margin rule to an externally produced
candidate path, and ``table`` re-aggregates a saved records CSV.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, PathvalError
from .harness import ExperimentConfig, run_experiment, summarize_records
from .instances import (
    draw_samples,
    generate_canonical_instance,
    read_samples,
    write_instance,
    write_samples,
)
from .numerics import RngStream
from .reformulations import METHODS, read_path_csv
from .validators import RULES, MarginRule, evaluate_h_matrix, select_candidate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pathval")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a replication experiment")
    run.add_argument("--config", type=Path, help="experiment config JSON")
    run.add_argument("--method", choices=METHODS)
    run.add_argument("--validators", help="comma-separated rules, e.g. univariate,plain")
    run.add_argument("--reps", type=int, help="number of replications")
    run.add_argument("--seed", type=int, help="master seed")
    run.add_argument("--threads", type=int)
    run.add_argument("--out", type=Path, help="output directory")

    gen = sub.add_parser("gen-data", help="write a canonical instance and samples")
    gen.add_argument("--d", type=int, required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--out", type=Path, required=True, help="output directory")
    gen.add_argument("--alpha", type=float, default=0.1)

    val = sub.add_parser("validate", help="validate an exported candidate path")
    val.add_argument("--path", type=Path, required=True, help="candidate path CSV")
    val.add_argument("--samples", type=Path, required=True, help="held-out samples CSV")
    val.add_argument("--gamma", type=float, required=True)
    val.add_argument("--beta", type=float, required=True)
    val.add_argument("--rule", choices=RULES, required=True)
    val.add_argument("--b", type=float, required=True, help="constraint right-hand side")
    val.add_argument("--budget", type=int, default=200_000)
    val.add_argument("--seed", type=int, default=0)
    val.add_argument("--out", type=Path, help="write the report JSON here instead of stdout")

    table = sub.add_parser("table", help="summarize a saved records CSV")
    table.add_argument("--records", type=Path, required=True)
    table.add_argument("--method", choices=METHODS, default="ro")
    return parser


def _cmd_run(args) -> int:
    doc = {}
    if args.config is not None:
        try:
            doc = json.loads(args.config.read_text(encoding="utf-8"))
        except FileNotFoundError:
            print(f"config file not found: {args.config}", file=sys.stderr)
            return EXIT_CONFIG
        except json.JSONDecodeError as exc:
            print(f"config is not valid JSON: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    if args.method:
        doc["method"] = args.method
    if args.validators:
        doc["validators"] = [tok.strip() for tok in args.validators.split(",") if tok.strip()]
    if args.reps is not None:
        doc["replications"] = args.reps
    if args.seed is not None:
        doc["master_seed"] = args.seed
    if args.threads is not None:
        doc["threads"] = args.threads
    if args.out is not None:
        doc["out_dir"] = str(args.out)
    config = ExperimentConfig.from_dict(doc)
    result = run_experiment(config)
    sys.stdout.write(result.summary.to_json())
    return EXIT_OK


def _cmd_gen_data(args) -> int:
    inst = generate_canonical_instance(args.d, args.seed, alpha=args.alpha)
    samples = draw_samples(inst, args.n, RngStream(args.seed, index=1))
    args.out.mkdir(parents=True, exist_ok=True)
    write_instance(inst, args.out / "instance.json")
    write_samples(samples, args.out / "samples.csv")
    print(f"wrote {args.out / 'instance.json'} and {args.out / 'samples.csv'}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    path = read_path_csv(args.path)
    samples = read_samples(args.samples)
    solved = next(cand for cand in path.candidates if cand.x is not None)
    if solved.x.shape[0] != samples.dim:
        raise ConfigError(
            f"candidate dimension {solved.x.shape[0]} does not match "
            f"sample dimension {samples.dim}"
        )
    hmat = evaluate_h_matrix(path, samples.rows, args.b)
    rng = RngStream(args.seed, index=0)
    rule = MarginRule(rule=args.rule, beta=args.beta, budget=args.budget, rng=rng)
    report = select_candidate(path, hmat, args.gamma, rule)
    text = json.dumps(report.to_json_dict(), sort_keys=True, indent=2) + "\n"
    if args.out is not None:
        args.out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_table(args) -> int:
    summary = summarize_records(args.records, method=args.method)
    sys.stdout.write(summary.to_json())
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "gen-data": _cmd_gen_data,
        "validate": _cmd_validate,
        "table": _cmd_table,
    }
    try:
        return handlers[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PathvalError, ArithmeticError) as exc:
        # bad inputs exit 2; lost numerical reliability exits 3
        if isinstance(exc, ArithmeticError):
            print(f"numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
