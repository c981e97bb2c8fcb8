"""Command-line driver.

Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import experiments
from .errors import ConfigurationError, SolverError
from .io import RunConfig, load_config
from .selftest import run_selftest

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4


def _ell_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid ell list {text!r}") from None


def build_parser():
    parser = argparse.ArgumentParser(prog="chbiot", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default):
        p.add_argument("--config", metavar="PATH", help="key = value run configuration")
        p.add_argument("--out", metavar="DIR", default=out_default, help="output directory")
        p.add_argument("--ell", type=_ell_list, metavar="X[,Y,...]", help="interface width override")

    p = sub.add_parser("run", help="time-step one scenario")
    common(p, "out")
    p.add_argument("--scenario", help="paper_halfspace, ch_relax_1d, ch_disk or custom")

    p = sub.add_parser("sweep", help="half-space runs over several interface widths")
    common(p, "out_sweep")

    p = sub.add_parser("bench-disk", help="Gibbs-Thomson disk benchmark")
    common(p, "out_disk")
    p.add_argument("--r0", type=float, help="disk radius (default: disk_r0 from config)")

    sub.add_parser("selftest", help="run the invariant checks")
    return parser


def _config(args):
    config = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "scenario", None):
        config = config.replace(scenario=args.scenario)
    return config


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "selftest":
            return EXIT_OK if run_selftest() else 1
        config = _config(args)
        if args.command == "run":
            if args.ell:
                config = config.replace(ell=args.ell[0])
            result = experiments.run(config, out_dir=args.out)
            if result.exit_status:
                print(f"solver failure at step {result.failure_step}: {result.message}", file=sys.stderr)
            else:
                print(f"completed {config.num_steps} steps, outputs in {args.out}")
            return result.exit_status
        if args.command == "sweep":
            ells = args.ell or [0.1, 0.05, 0.025]
            rows, _ = experiments.sweep(config, ells, args.out)
            for r in rows:
                print(f"ell={r.ell:g} h={r.h:.4f} x_half={r.x_half:.4f} width_19={r.width_19:.4f} "
                      f"jump_p={r.jump_p:.3e} jump_u={r.jump_u:.3e} {r.status}")
            return EXIT_OK if all(r.status == "ok" for r in rows) else EXIT_SOLVER
        if args.command == "bench-disk":
            if args.ell:
                config = config.replace(ell=args.ell[0])
            rep = experiments.bench_disk(config, args.r0, args.out)
            print(f"r0={rep.r0:g} radius={rep.radius:.4f} mu={rep.mu_measured:.4f} "
                  f"target={rep.mu_target:.4f} ratio={rep.ratio:.3f}")
            return EXIT_OK
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
