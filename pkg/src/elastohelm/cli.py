"""Command-line entry point: ``elastohelm <experiment> [--config f.json] [--out dir]``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from .experiments import (DRIVERS, EXPERIMENTS, ConfigError, default_config,
                          load_config, write_csv)

log = logging.getLogger("elastohelm")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _parser():
    p = _Parser(prog="elastohelm",
                description="Shifted-Laplacian multigrid benchmarks for the "
                            "elastic Helmholtz equation.")
    sub = p.add_subparsers(dest="command", metavar="command")
    sub.required = True
    for name in EXPERIMENTS:
        s = sub.add_parser(name, help=DRIVERS[name].__doc__.splitlines()[0])
        s.add_argument("--config", type=Path,
                       help="JSON experiment config (default: built-in desk-scale setup)")
        s.add_argument("--out", type=Path, default=Path("results"),
                       help="output directory (default: ./results)")
        s.add_argument("--threads", type=int, default=1,
                       help="threads for BLAS and cell-wise relaxation")
        s.add_argument("--seed", type=int, default=0,
                       help="seed for synthetic models")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except _UsageError as err:
        print(err, file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as err:  # --help
        return EXIT_OK if not err.code else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    kind = args.command
    try:
        if args.config is None:
            cfg, base = default_config(kind), Path(".")
        else:
            cfg, base = load_config(args.config, kind), args.config.parent
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
    except ConfigError as err:
        print(f"elastohelm: {err}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with threadpool_limits(limits=args.threads):
            rows = DRIVERS[kind](cfg, out_dir=args.out, threads=args.threads,
                                 seed=args.seed, base=base)
    except ConfigError as err:
        print(f"elastohelm: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError, ValueError, MemoryError) as err:
        print(f"elastohelm: solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER
    path = write_csv(rows, args.out / f"{kind}.csv")
    for r in rows:
        print(",".join(r.fields()))
    print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
