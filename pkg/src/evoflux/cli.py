"""Command-line entry point: run configured cases, verify property suites."""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config
from .experiments import known_cases


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evoflux",
        description="march neural-network ansatz parameters through PDE dynamics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a configured case")
    p_run.add_argument("--config", required=True, help="YAML run config")
    p_run.add_argument("--out", default=None, help="output directory (default: $EVOFLUX_OUTPUT_ROOT/<case>)")
    p_run.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="dotted config override, e.g. march.steps=10 (repeatable)",
    )
    p_run.add_argument("--snapshot-every", type=int, default=None, help="override output.snapshot_every")
    p_run.add_argument("--threads", type=int, default=None, help="override worker thread count")
    p_run.add_argument("--quiet", action="store_true")

    p_ver = sub.add_parser("verify", help="run property suites")
    p_ver.add_argument("suites", nargs="*", help="suite names (default: all)")
    p_ver.add_argument("--list", action="store_true", help="list available suites")

    sub.add_parser("cases", help="list named case presets")
    return parser


def cmd_run(args) -> int:
    from . import runner

    overrides = list(args.overrides)
    if args.snapshot_every is not None:
        overrides.append(f"output.snapshot_every={args.snapshot_every}")
    if args.threads is not None:
        overrides.append(f"threads={args.threads}")
    try:
        cfg = load_config(args.config, overrides)
    except FileNotFoundError:
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if cfg.long_running and not args.quiet:
        print(
            f"note: case {cfg.case!r} is tagged long-running "
            f"({cfg.march.steps} steps); use --set march.steps=... to scale down",
            file=sys.stderr,
        )
    summary = runner.run(cfg, outdir=args.out, quiet=args.quiet)
    if summary["status"] != "ok":
        print(f"error: run aborted: {summary['error']}", file=sys.stderr)
        return 3
    if not args.quiet:
        print(f"done: {summary['steps']} steps in {summary['wall_time']:.1f}s -> {summary['outdir']}")
    return 0


def cmd_verify(args) -> int:
    from .verify import SUITES, UnknownSuite, run_suites

    if args.list:
        for name in sorted(SUITES):
            print(name)
        return 0
    try:
        results, ok = run_suites(args.suites or None)
    except UnknownSuite as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    width = max(len(c.name) for _, c in results)
    for suite, check in results:
        status = "PASS" if check.passed else "FAIL"
        print(
            f"[{status}] {suite:12s} {check.name:<{width}s} "
            f"measured={check.measured:.3e} tol={check.tolerance:.1e}"
        )
    return 0 if ok else 1


def cmd_cases(_args) -> int:
    from .config import as_dict
    from .experiments import case_preset

    for name in known_cases():
        if name == "custom":
            continue
        cfg = case_preset(name)
        tag = " (long-running)" if cfg.long_running else ""
        print(f"{name:22s} steps={cfg.march.steps:<10d} dt={cfg.march.dt:g}{tag}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "verify":
        return cmd_verify(args)
    if args.command == "cases":
        return cmd_cases(args)
    return 2


if __name__ == "__main__":
    sys.exit(main())
