"""Command-line entry point ``scatter2d``.

Subcommands::

    scatter2d run SCENARIO [-o DIR]
    scatter2d forward-only SCENARIO [-o DIR]
    scatter2d validate-ej0 SCENARIO
    scatter2d norm-sweep [--r-min 0.1 --r-max 1.5 --points 10 --cells-per-lambda 10] [-o DIR]

``SCATTER2D_THREADS`` caps the number of BLAS/OpenMP threads.  It has to be
applied before numpy is imported, which is why numerical modules are only
imported inside :func:`main`.
"""

import argparse
import logging
import os
import sys

THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _configure_threads():
    n = os.environ.get("SCATTER2D_THREADS")
    if not n:
        return
    if not n.isdigit() or int(n) < 1:
        raise SystemExit(f"scatter2d: SCATTER2D_THREADS must be a positive integer, got {n!r}")
    for var in THREAD_VARS:
        os.environ[var] = n


def build_parser():
    p = argparse.ArgumentParser(prog="scatter2d", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario end to end")
    run.add_argument("scenario")
    run.add_argument("-o", "--output", help="override the scenario's output directory")

    fwd = sub.add_parser("forward-only", help="generate synthetic data for a scenario")
    fwd.add_argument("scenario")
    fwd.add_argument("-o", "--output")

    val = sub.add_parser("validate-ej0", help="check the data-derived J0 field")
    val.add_argument("scenario")
    val.add_argument("--max-residual", type=float, default=0.03,
                     help="fail when the state residual exceeds this (default 0.03)")

    ns = sub.add_parser("norm-sweep", help="operator norms against electrical size")
    ns.add_argument("--r-min", type=float, default=0.1)
    ns.add_argument("--r-max", type=float, default=1.5)
    ns.add_argument("--points", type=int, default=10)
    ns.add_argument("--cells-per-lambda", type=float, default=10)
    ns.add_argument("-o", "--output", default=".")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    _configure_threads()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return _dispatch(args)
    except (OSError, ValueError, ArithmeticError, MemoryError, KeyError) as exc:
        print(f"scatter2d {args.command}: error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args):
    from . import pipeline
    from .config import load_scenario

    if args.command == "norm-sweep":
        sweep, path = pipeline.sweep_norms(args.r_min, args.r_max, args.points,
                                           args.cells_per_lambda, args.output)
        print("R_over_lambda  norm_Ai  norm_AiY0")
        for r, a, b in zip(sweep.radii, sweep.norm_ai, sweep.norm_aiy0):
            print(f"{r:12.4f}  {a:7.4f}  {b:9.4f}")
        print(f"wrote {path}")
        return 0

    sc = load_scenario(args.scenario)
    if args.command == "run":
        metrics = pipeline.run_scenario(sc, args.output)
        nm = metrics.get("nmse")
        print(f"{metrics['method']}: nmse={'n/a' if nm is None else f'{nm:.4f}'} "
              f"-> {args.output or sc.output.directory}")
        return 0
    if args.command == "forward-only":
        pipeline.run_forward_only(sc, args.output)
        print(f"wrote {args.output or sc.output.directory}")
        return 0
    ident, state = pipeline.validate_ej0(sc)
    print(f"E_J0 identity error {ident:.3e}")
    print(f"Y0 state residual   {state:.3e}")
    if state > args.max_residual:
        print(f"scatter2d validate-ej0: residual above {args.max_residual:g}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
