"""Command-line entry point.

    superatom-qpt run <preset|config.json> [--out DIR] [--tol X] [--threads K]
    superatom-qpt list
    superatom-qpt validate <preset|config.json>

Exit codes: 0 success, 2 invalid configuration, 3 MLE did not converge,
4 the integrator failed.
"""

import argparse
import json
import logging
import os
import sys

from . import __version__
from .errors import ConvergenceFailure, IntegrationFailure, InvalidArgument, InvalidConfig
from .experiments import PRESETS, list_presets, load_config, run_experiment, validate_config

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_CONVERGENCE = 3
EXIT_INTEGRATION = 4

log = logging.getLogger("superatom_qpt")


def _resolve(target):
    """A preset name becomes ``{"preset": name}``; anything else is read as a JSON file."""
    if target in PRESETS:
        return {"preset": target}
    if not os.path.exists(target):
        raise InvalidConfig([f"{target}: neither a preset ({', '.join(PRESETS)}) nor a file"])
    return load_config(target)


def _cmd_list(args):
    for p in list_presets():
        print(f"{p['name']:<18} ~{p['budget_s']:>5.0f} s  {p['description']}")
        if args.verbose:
            print("    defaults: " + json.dumps(p["defaults"], sort_keys=True))
    return EXIT_OK


def _cmd_validate(args):
    diag = validate_config(_resolve(args.config))
    if diag:
        for d in diag:
            print(d, file=sys.stderr)
        return EXIT_INVALID
    print("ok")
    return EXIT_OK


def _cmd_run(args):
    config = _resolve(args.config)
    report = run_experiment(config, out_dir=args.out, tol=args.tol, threads=args.threads)
    print(f"{report.name}: wrote {len(report.files)} files to {report.out_dir} "
          f"in {report.timing['total']:.1f} s")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="superatom-qpt",
        description="Simulated gates and tomography for Rydberg superatom qubits.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="more logging output")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a preset or a JSON configuration")
    run.add_argument("config", help="preset name or path to a JSON configuration")
    run.add_argument("--out", help="output directory (default: $SUPERATOM_QPT_OUT/<name> or "
                                   "results/<name>)")
    run.add_argument("--tol", type=float, help="integrator tolerance, within [1e-14, 1e-6]")
    run.add_argument("--threads", type=int, help="worker threads for independent simulations")
    run.set_defaults(func=_cmd_run)

    lst = sub.add_parser("list", help="list the available presets")
    lst.set_defaults(func=_cmd_list)

    val = sub.add_parser("validate", help="check a configuration without running it")
    val.add_argument("config", help="preset name or path to a JSON configuration")
    val.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InvalidConfig as exc:
        for d in exc.diagnostics:
            print(f"error: {d}", file=sys.stderr)
        return EXIT_INVALID
    except ConvergenceFailure as exc:
        print(f"error: MLE reconstruction failed: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except IntegrationFailure as exc:
        print(f"error: integration failed: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    except InvalidArgument as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
