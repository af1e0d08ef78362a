"""Command-line front end (``curvedmodel`` / ``python -m curvedmodel``).

The shell parses flags into a :class:`RunConfig`, calls
:func:`curvedmodel.commands.execute` and writes the result: JSON (17
significant digits) or CSV to ``--out`` or stdout, the human-readable
summary to stderr.  No computation happens here.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .commands import EXIT_SCHEMA, dumps, execute
from .config import RunConfig, Tolerances

COMMANDS = ("product", "factorize", "regularity", "verify", "worked-examples", "emit-samples")

_HELP = {
    "product": "cascade product of system files, written leftmost-last-applied (S3 S2 S1)",
    "factorize": "invariant-subspace lattice and regular factorizations of one symbol "
                 "(file, theta, power:p or blaschke:a,b,..)",
    "regularity": "defect-range regularity report of an NCharFn file",
    "verify": "model axioms, projection identities and round trip of a model or NCharFn file "
              "(built-in theta chain when no file is given)",
    "worked-examples": "reproduce every printed example at each epsilon given",
    "emit-samples": "CSV of boundary traces of symbols or files",
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="curvedmodel", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS, help="; ".join(f"{k}: {v}" for k, v in _HELP.items()))
    ap.add_argument("inputs", nargs="*", help="input files, built-in symbols or epsilon values")
    ap.add_argument("--epsilon", type=complex, default=0.2, help="curve parameter (|epsilon| < 1/2)")
    ap.add_argument("--order", type=int, default=48, help="truncation order K (<= 128)")
    ap.add_argument("--grid", type=int, default=1024, help="grid size M (even, <= 8192, >= 4K+4)")
    ap.add_argument("--tol", type=float, default=Tolerances().check, help="verification threshold")
    ap.add_argument("--seed", type=int, default=0, help="seed for randomized suites")
    ap.add_argument("--out", default=None, help="output file (default stdout)")
    ap.add_argument("--budget", type=int, default=32, help="largest invariant-subspace lattice")
    ap.add_argument("--grouping", choices=("right", "left"), default="right",
                    help="association of products of three or more systems")
    return ap


def config_from_args(args: argparse.Namespace) -> RunConfig:
    eps = args.epsilon.real if args.epsilon.imag == 0 else args.epsilon
    cfg = RunConfig(command=args.command, epsilon=eps, order=args.order, grid=args.grid,
                    seed=args.seed, inputs=tuple(args.inputs), out=args.out, budget=args.budget,
                    grouping=args.grouping)
    return cfg.with_tol(args.tol)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ValueError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    res = execute(cfg)
    body = res.csv if res.csv is not None else (dumps(res.payload) if res.payload is not None else None)
    if body is not None:
        if cfg.out:
            Path(cfg.out).write_text(body)
        else:
            sys.stdout.write(body)
    if res.text:
        print(res.text, file=sys.stderr)
    return res.code


if __name__ == "__main__":
    sys.exit(main())
