"""Command line entry point: ``fracocp {run,accept,assemble-only,clean-cache,plot-data}``.

Exit codes: 0 success, 1 solver or acceptance failure, 2 configuration error.
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .harness import (ConfigError, RunConfig, assemble_only, clean_cache, emit_plot_data,
                      read_errors_csv, run_acceptance, run_experiment)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _load_config(args):
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    if getattr(args, "output_dir", None):
        cfg = replace(cfg, output_dir=args.output_dir)
    return cfg


def _cmd_run(args):
    cfg = _load_config(args)
    res = run_experiment(cfg)
    for p in res.files:
        print(p)
    if getattr(args, "plot_data", None):
        emit_plot_data(res.records, args.plot_data)
        print(args.plot_data)
    for c in res.cells:
        if c.failure:
            print(f"FAILED {c.scheme} s={c.s:g} level {c.level}: {c.failure}", file=sys.stderr)
    return EXIT_FAIL if res.failed else EXIT_OK


def _cmd_accept(args):
    results = run_acceptance(_load_config(args))
    for c in results:
        print(c.line())
    return EXIT_OK if all(c.passed for c in results) else EXIT_FAIL


def _cmd_assemble(args):
    for s, lev, n, t in assemble_only(_load_config(args)):
        print(f"s={s:g} level={lev} ndofs={n} seconds={t:.2f}")
    return EXIT_OK


def _cmd_clean(args):
    cache = args.cache_dir
    if cache is None and args.config:
        cache = _load_config(args).resolved_cache_dir()
    print(f"removed {clean_cache(cache)} cached matrices")
    return EXIT_OK


def _cmd_plot(args):
    records = [read_errors_csv(p) for p in sorted(Path(args.results).glob("errors_*.csv"))]
    if not records:
        raise ConfigError(f"no errors_*.csv files in {args.results}")
    text = emit_plot_data(records, args.output)
    if args.output is None:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="fracocp", description="Sparse fractional optimal control convergence study")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the convergence sweep and write CSV tables")
    p.add_argument("--config")
    p.add_argument("--output-dir")
    p.add_argument("--plot-data", help="also write the long-format CSV here")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("accept", help="run the acceptance checks")
    p.add_argument("--config")
    p.add_argument("--output-dir")
    p.set_defaults(func=_cmd_accept)

    p = sub.add_parser("assemble-only", help="fill the matrix cache")
    p.add_argument("--config")
    p.set_defaults(func=_cmd_assemble)

    p = sub.add_parser("clean-cache", help="delete cached matrices")
    p.add_argument("--config")
    p.add_argument("--cache-dir")
    p.set_defaults(func=_cmd_clean)

    p = sub.add_parser("plot-data", help="convert errors_*.csv files to long format")
    p.add_argument("results", help="directory holding errors_*.csv")
    p.add_argument("-o", "--output")
    p.set_defaults(func=_cmd_plot)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
