"""Command-line entry point.

Exit codes: 0 success, 1 config error, 2 numerical-integrity error,
3 partial sweep failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from ..errors import ConfigError, NumericalIntegrityError, TMVSError
from . import scenarios
from .config import load_scenario, load_sweep
from .run import run_scenario, run_sweep, steady_scenario, validate_scenario

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_PARTIAL = 0, 1, 2, 3

log = logging.getLogger("tmvsim")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--out-dir", default="out", help="directory for CSV, manifest and figures (default: out)")
    p.add_argument("--workers", type=int, default=1, help="concurrent sweep runs (default: 1)")
    p.add_argument("--plot", action=argparse.BooleanOptionalAction, default=True, help="write SVG figures")
    p.add_argument("--dim-a", type=int, default=None, help="override Fock truncation of mode a")
    p.add_argument("--dim-b", type=int, default=None, help="override Fock truncation of mode b")
    p.add_argument("--quiet", action="store_true", help="only print errors")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="tmvsim", description="Two-mode squeezing by reservoir engineering.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, target, help_ in (
        ("run", "scenario", "evolve a scenario and write its trajectory"),
        ("sweep", "sweep", "run a parameter sweep"),
        ("steady", "scenario", "solve for the steady state of a scenario"),
        ("validate-rwa", "scenario", "compare the full sideband model with the effective model"),
    ):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.add_argument("config", help=f"{target} YAML file or built-in name")
    sub.add_parser("list-builtin", parents=[common], help="list built-in scenarios and sweeps")
    return parser


def _say(args, msg):
    if not args.quiet:
        print(msg)


def _cmd_run(args):
    cfg = load_scenario(args.config, args.dim_a, args.dim_b)
    res = run_scenario(cfg, args.out_dir, plot=args.plot)
    t = res.trajectory
    _say(args, f"{cfg.name}: t = {t.times[-1]:g}, <n_a> = {t.final('mean_quanta_a'):.6f}, "
               f"variance = {t.final('duan_variance'):.6f}, fidelity = {t.final('tmvs_fidelity'):.6f}")
    _say(args, f"wrote {res.csv_path}")
    if res.flags:
        print(f"WARNING: {cfg.name}: {', '.join(res.flags)} "
              f"(max leakage {t.metadata['max_leakage']:.2e})", file=sys.stderr)
    return EXIT_OK


def _cmd_steady(args):
    cfg = load_scenario(args.config, args.dim_a, args.dim_b)
    res = steady_scenario(cfg, args.out_dir)
    o = res.observables
    _say(args, f"{cfg.name} steady: <n_a> = {o['mean_quanta_a']:.6f}, variance = {o['duan_variance']:.6f}, "
               f"fidelity = {o['tmvs_fidelity']:.6f}, ground = {o['pop_atom_0']:.6f}")
    _say(args, f"wrote {res.csv_path}")
    if res.flags:
        print(f"WARNING: {cfg.name}: {', '.join(res.flags)} (leakage {o['leakage']:.2e})", file=sys.stderr)
    return EXIT_OK


def _cmd_sweep(args):
    spec = load_sweep(args.config, args.dim_a, args.dim_b)
    res = run_sweep(spec, args.out_dir, workers=max(1, args.workers), plot=args.plot)
    for r in res.rows:
        status = f"{r['result']:.6g}" if r["status"] == "ok" else f"FAILED ({r['error']})"
        _say(args, f"{spec.axis} = {r['value']:g}: {spec.reduce} = {status}")
    _say(args, f"wrote {res.summary_path}")
    return EXIT_PARTIAL if res.failures else EXIT_OK


def _cmd_validate(args):
    cfg = load_scenario(args.config, args.dim_a, args.dim_b)
    rows, passed = validate_scenario(cfg, args.out_dir, plot=args.plot)
    for r in rows:
        _say(args, f"nu/eta Omega = {r['nu_over_lambda']:g}: max trace distance = "
                   f"{r['max_trace_distance']:.3e} [{'pass' if r['passed'] else 'fail'}]")
    _say(args, f"RWA audit {'PASSED' if passed else 'FAILED'}")
    return EXIT_OK if passed else EXIT_NUMERIC


def _cmd_list(args):
    for name in scenarios.names():
        data = scenarios.get(name)
        print(f"{name:24s} {scenarios.kind(name):9s} {data.get('description', '')}")
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "steady": _cmd_steady,
            "validate-rwa": _cmd_validate, "list-builtin": _cmd_list}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalIntegrityError as exc:
        print(f"numerical integrity error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except TMVSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
