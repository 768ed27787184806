"""Command-line interface.

Subcommands:

* ``run <config.json> [--out PATH] [--reps N] [--seed S]`` -- execute one
  experiment config, write the record CSV, print the summary.
* ``sweep <config.json> [--out PATH]`` -- run the config once per axis
  value; records carry the axis tag.
* ``exact product-tv <instance.json> --n K [--out PATH]`` -- exact n-fold
  product total-variation sandwich rows for an instance file (data law vs
  each model) or a {"p": ..., "q": ...} pair file.
* ``verify <suite|all> [--out-dir DIR]`` -- run a named acceptance suite,
  print one pass/fail line per criterion, exit nonzero on failure.

The VALIDLEARN_THREADS environment variable caps replication concurrency;
outputs are byte-identical regardless of its value.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .acceptance import SUITES, run_all, run_suite
from .densities import PiecewiseDensity, invalidity
from .exactcheck import ProductTVReport
from .experiments import (
    ConfigError,
    ExperimentConfig,
    format_summary,
    run_experiment,
    sweep,
    write_product_csv,
    write_records_csv,
)
from .instances import ProblemInstance
from .intervals import IntervalUnion


def _load_config(path: str) -> ExperimentConfig:
    with open(path) as fh:
        data = json.load(fh)
    return ExperimentConfig.from_dict(data)


def _emit(result, cfg: ExperimentConfig, out_override: str | None) -> None:
    out = out_override or cfg.out
    if result.records:
        if out:
            write_records_csv(out, result.records)
            print(f"wrote {len(result.records)} records to {out}")
        else:
            print(f"{len(result.records)} records (no --out given, CSV not written)")
    if result.product_rows:
        if out:
            write_product_csv(out, result.product_rows)
            print(f"wrote {len(result.product_rows)} product rows to {out}")
    print(format_summary(result.summary))


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    if args.reps is not None:
        cfg = replace(cfg, reps=args.reps)
    if args.seed is not None:
        cfg = replace(cfg, base_seed=args.seed)
    result = run_experiment(cfg)
    _emit(result, cfg, args.out)
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    result = sweep(cfg)
    _emit(result, cfg, args.out)
    return 0


def _cmd_exact_product_tv(args: argparse.Namespace) -> int:
    with open(args.instance) as fh:
        data = json.load(fh)
    rows = []
    if "p" in data and "q" in data:
        p = PiecewiseDensity.from_dict(data["p"])
        q = PiecewiseDensity.from_dict(data["q"])
        valid = IntervalUnion.from_dict(data["valid"]) if "valid" in data else None
        pairs = [("p-q", p, q, valid)]
    else:
        inst = ProblemInstance.from_dict(data)
        pairs = [
            (f"P-Q{i}", inst.P, qq, inst.valid_region)
            for i, qq in enumerate(inst.Q)
        ]
    from .experiments import SCHEMA_VERSION, _fmt

    for name, p, q, valid in pairs:
        margin = None
        if valid is not None:
            inv_q = invalidity(q, valid)
            if invalidity(p, valid) <= 1e-12 and inv_q > 0.0:
                margin = inv_q
        for n in range(1, args.n + 1):
            rep = ProductTVReport.build(p, q, n, invalid_mass_of_q=margin)
            rows.append(
                (
                    SCHEMA_VERSION,
                    "exact-product-tv",
                    name,
                    str(rep.n),
                    _fmt(rep.tv_single),
                    _fmt(rep.exact_tv),
                    _fmt(rep.reis_lower),
                    _fmt(rep.subadditive_upper),
                    "" if rep.invalid_margin_lower is None else _fmt(rep.invalid_margin_lower),
                )
            )
    if args.out:
        write_product_csv(args.out, rows)
        print(f"wrote {len(rows)} product rows to {args.out}")
    else:
        for row in rows:
            print(",".join(row))
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    if args.suite == "all":
        results = run_all()
    else:
        results = [run_suite(args.suite)]
    for res in results:
        print(res.line())
        if args.out_dir and res.records:
            path = f"{args.out_dir}/{res.key}.csv"
            write_records_csv(path, res.records)
            print(f"  records -> {path}")
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="validlearn",
        description="validity-constrained distribution learning simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="record CSV path (overrides config)")
    p_run.add_argument("--reps", type=int, help="override replication count")
    p_run.add_argument("--seed", type=int, help="override base seed")
    p_run.set_defaults(fn=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a config across its sweep axis")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--out", help="record CSV path (overrides config)")
    p_sweep.set_defaults(fn=_cmd_sweep)

    p_exact = sub.add_parser("exact", help="exact closed-form evaluations")
    exact_sub = p_exact.add_subparsers(dest="exact_command", required=True)
    p_ptv = exact_sub.add_parser(
        "product-tv", help="exact n-fold product total-variation sandwich"
    )
    p_ptv.add_argument("instance", help="instance JSON or {p, q[, valid]} pair JSON")
    p_ptv.add_argument("--n", type=int, required=True, help="max product length")
    p_ptv.add_argument("--out", help="product CSV path")
    p_ptv.set_defaults(fn=_cmd_exact_product_tv)

    p_verify = sub.add_parser("verify", help="run a named acceptance suite")
    p_verify.add_argument("suite", choices=sorted(SUITES) + ["all"])
    p_verify.add_argument("--out-dir", help="write suite record CSVs here")
    p_verify.set_defaults(fn=_cmd_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print("config error:", file=sys.stderr)
        for problem in e.problems:
            print(f"  - {problem}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
