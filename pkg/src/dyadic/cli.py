"""Command line entry point: ``dyadic run|compare|envelope|subseq``."""

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor

from . import runner
from .runner import ConfigError, ScenarioConfig


def _print_json(payload):
    print(json.dumps(payload, indent=2, sort_keys=True))


def _run_one(path):
    try:
        cfg = ScenarioConfig.from_file(path)
    except ConfigError as exc:
        return path, runner.EXIT_CONFIG, {"error": str(exc)}
    code, report = runner.run_scenario(cfg)
    summary = {
        "output": str(cfg.output_dir),
        "status": report["status"],
        "checks": {c["name"]: c["pass"] for c in report["checks"]},
    }
    return path, code, summary


def cmd_run(args):
    # scenarios run concurrently; each writes to its own directory
    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        results = list(pool.map(_run_one, args.configs))
    code = 0
    for path, rc, summary in results:
        if rc == runner.EXIT_CONFIG:
            print(f"{path}: config error: {summary['error']}", file=sys.stderr)
        else:
            print(f"{path}: {summary['status']} -> {summary['output']}")
            for name, ok in summary["checks"].items():
                print(f"  {'PASS' if ok else 'FAIL'}  {name}")
        code = max(code, rc)
    return code


def cmd_compare(args):
    try:
        table = runner.compare_runs(args.report_a, args.report_b)
    except (OSError, ValueError, KeyError) as exc:
        print(f"compare failed: {exc}", file=sys.stderr)
        return runner.EXIT_CONFIG
    _print_json(table)
    return runner.EXIT_OK


def cmd_envelope(args):
    try:
        cfg = ScenarioConfig.from_file(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return runner.EXIT_CONFIG
    code, out = runner.run_envelope(cfg)
    _print_json(out)
    return code


def cmd_subseq(args):
    try:
        cfg = ScenarioConfig.from_file(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return runner.EXIT_CONFIG
    rows, status = runner.subsequence_table(cfg, args.n0, args.theta, args.K, args.length)
    print(f"# status: {status}")
    print(f"{'k':>4} {'n_k':>10} {'gap':>6} {'threshold':>12}")
    for r in rows:
        gap = "" if r["gap"] is None else r["gap"]
        thr = "" if r["threshold"] is None else f"{r['threshold']:.6g}"
        print(f"{r['k']:>4} {r['n_k']:>10} {gap:>6} {thr:>12}")
    return runner.EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="dyadic", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="integrate scenarios and run their checks")
    p.add_argument("configs", nargs="+")
    p.add_argument("-j", "--jobs", type=int, default=4)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="sup differences between two runs")
    p.add_argument("report_a")
    p.add_argument("report_b")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("envelope", help="bounding sequence only, no integration")
    p.add_argument("config")
    p.set_defaults(func=cmd_envelope)

    p = sub.add_parser("subseq", help="print the index ladder n_k")
    p.add_argument("config")
    p.add_argument("--n0", type=int, default=1)
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("-K", type=int, default=20)
    p.add_argument("--length", type=int, default=100_000)
    p.set_defaults(func=cmd_subseq)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
