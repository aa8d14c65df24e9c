"""Command line entry point: ``sparse-ocp <subcommand> [options]``.

Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiments as ex
from .errors import NumericalError
from .quad1d import hermite_bound_report
from .sparse_quad import IntegrandError, fmt

log = logging.getLogger("sparse_ocp")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config, merged over the preset")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--preset", choices=sorted(ex.PRESETS), default="desk")
    common.add_argument("--seed", type=int, help="seed for MC studies and parameter samples")
    common.add_argument("--alpha", type=float, help="override the field decay exponent")
    common.add_argument("--n-max", type=int, help="override the maximum number of indices")
    common.add_argument("--mode", choices=["apriori", "aposteriori", "both"], help="indicator mode(s)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="sparse-ocp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="solve the optimality system at one parameter vector")
    p.add_argument("--y", help="comma-separated leading parameter entries (rest zero); default: sample by seed")

    sub.add_parser("converge", parents=[common], help="adaptive sparse quadrature convergence + MC baseline")
    p = sub.add_parser("samples", parents=[common], help="optimal state/control at random samples")
    p.add_argument("--n-samples", type=int)
    sub.add_parser("levels", parents=[common], help="per-dimension maximum levels of the adaptive sets")

    p = sub.add_parser("quadcheck", parents=[common], help="max |Q_nu[H_l]| table as CSV")
    p.add_argument("--nu-max", type=int, default=20)
    p.add_argument("--l-max", type=int, default=100)

    p = sub.add_parser("mc", parents=[common], help="Monte Carlo convergence study")
    p.add_argument("--reference", type=float, help="reference value (default: a-posteriori sparse run)")
    return parser


def load_config(args) -> ex.ExperimentConfig:
    overrides: dict = {}
    if args.config is not None:
        overrides = json.loads(args.config.read_text())
    cfg = ex.merge(ex.merge(ex.ExperimentConfig().to_dict(), ex.PRESETS[args.preset]), overrides)
    if args.alpha is not None:
        cfg["field"]["alpha"] = args.alpha
    if args.n_max is not None:
        cfg["n_max"] = args.n_max
    if args.mode is not None:
        cfg["modes"] = ["apriori", "aposteriori"] if args.mode == "both" else [args.mode]
    if args.seed is not None:
        cfg["mc"]["seed"] = args.seed
    if args.out is not None:
        cfg["out"] = str(args.out)
    return ex.ExperimentConfig.from_dict(cfg)


def dispatch(args) -> None:
    if args.command == "quadcheck":
        report = hermite_bound_report(args.nu_max, args.l_max)
        lines = ["nu,l,value"] + [f"{nu},{l},{fmt(v)}" for nu, l, v in report.rows()]
        text = "\n".join(lines) + "\n"
        if args.out is not None:
            args.out.mkdir(parents=True, exist_ok=True)
            (args.out / "quadcheck.csv").write_text(text)
        else:
            sys.stdout.write(text)
        log.info("max |Q_nu[H_l]| = %.17g at (nu, l) = %s; %d entries above 2", report.max_value,
                 report.argmax, len(report.flagged))
        return

    config = load_config(args)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(config.to_json() + "\n")
    seed = args.seed if args.seed is not None else 0
    if args.command == "solve":
        y = [float(t) for t in args.y.split(",")] if args.y else None
        ex.run_solve(config, y=y, seed=seed)
    elif args.command == "converge":
        result = ex.run_convergence(config)
        for run in result["summary"]["runs"]:
            log.info("%s: slope vs indices %.3f, vs points %.3f, final error %.3e", run["mode"],
                     run["slope_vs_indices"], run["slope_vs_points"], run["final_error"])
    elif args.command == "samples":
        res = ex.run_samples(config, n_samples=args.n_samples, seed=seed)
        log.info("mean control rel. L2 distance to z_d: %.4f", res["mean_control_rel_l2_to_z_d"])
    elif args.command == "levels":
        ex.run_levels(config)
    elif args.command == "mc":
        study = ex.run_mc(config, reference=args.reference)
        log.info("MC slope %.3f", study.slope)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        dispatch(args)
    except (NumericalError, IntegrandError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, TypeError, json.JSONDecodeError, OSError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
