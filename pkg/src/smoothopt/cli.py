"""Command-line entry point.

Exit codes: 0 success, 1 partial failure (details in the manifest),
2 configuration error (unknown id, malformed config).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .core import ConfigurationError, ContractViolationError
from .harness import calc_sample_size, run_experiment, run_single, summarize


def _parse_set(items):
    overrides: dict = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigurationError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        target = overrides
        parts = key.split(".")
        for p in parts[:-1]:
            target = target.setdefault(p, {})
        target[parts[-1]] = value
    return overrides


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="smoothopt", description="Sampling-based optimization toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    for kind in ("bench", "landscape", "estimator"):
        p = sub.add_parser(kind, help=f"run a {kind} experiment from a JSON config")
        p.add_argument("config", type=Path)
        p.add_argument("--jobs", type=int, default=None)

    p_run = sub.add_parser("run", help="run one (algorithm, objective, seed) cell")
    p_run.add_argument("--alg", required=True)
    p_run.add_argument("--obj", required=True)
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p_run.add_argument("--out", type=Path, default=None)

    p_sum = sub.add_parser("summarize", help="summarize a directory of run records")
    p_sum.add_argument("record_dir", type=Path)
    p_sum.add_argument("--out", type=Path, default=None)

    p_calc = sub.add_parser("calc-n", help="evaluate the dual-annealing sample-size formulas")
    for flag in ("beta", "beta1", "e0", "d-tau", "delta", "v-minus1", "v0", "v1"):
        p_calc.add_argument(f"--{flag}", type=float, required=True)
    p_calc.add_argument("--iterations", type=int, required=True)
    p_calc.add_argument("--dim", type=int, required=True)
    for flag in ("t0", "t-c", "lambda0", "lambda-c"):
        p_calc.add_argument(f"--{flag}", type=float, default=None)

    args = parser.parse_args(argv)
    try:
        if args.command in ("bench", "landscape", "estimator"):
            result = run_experiment(args.config, jobs=args.jobs)
            print(f"wrote {result.output_dir} (exit {result.exit_code})")
            return result.exit_code
        if args.command == "run":
            record, cfg = run_single(args.obj, args.alg, args.seed, _parse_set(args.set))
            payload = {"record": record.to_dict(), "config": cfg}
            if args.out is not None:
                args.out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
                print(f"wrote {args.out}")
            else:
                print(json.dumps(payload, indent=2, sort_keys=True))
            print(f"final best cost: {record.final_best_cost:.6g} (evals {record.total_evals})", file=sys.stderr)
            return 0
        if args.command == "summarize":
            table = summarize(args.record_dir)
            out = args.out or (args.record_dir / "summary.csv")
            table.write_csv(out)
            for row in table.rows:
                std = "" if row.std_final_cost is None else f" +/- {row.std_final_cost:.4g}"
                print(f"{row.objective:20s} {row.algorithm:6s} {row.mean_final_cost:.6g}{std} (n={row.n_seeds})")
            if table.skipped:
                print(f"skipped malformed records: {table.skipped}", file=sys.stderr)
            return 0
        if args.command == "calc-n":
            out = calc_sample_size(
                beta=args.beta,
                beta1=args.beta1,
                iterations=args.iterations,
                dim=args.dim,
                e0=args.e0,
                d_tau=args.d_tau,
                delta=args.delta,
                v_minus1=args.v_minus1,
                v0=args.v0,
                v1=args.v1,
                t0=args.t0,
                t_c=args.t_c,
                lambda0=args.lambda0,
                lambda_c=args.lambda_c,
            )
            print(json.dumps(out, indent=2, sort_keys=True))
            return 0
    except (ConfigurationError, ContractViolationError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
