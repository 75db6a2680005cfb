"""Command-line interface.

Subcommands: report, sweep-remove, sweep-add, delay-grid, scaling, simulate,
verify.  Scenario parameters come from an optional sections-style config file
(--config) with CLI flags taking precedence; --emit-config prints the merged
effective configuration and exits without running.

Exit codes: 0 success, 2 config/parameter error, 3 numerical failure,
4 verification violation.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import experiments
from .errors import NumericalError, ParameterError
from .topology import scenario_from_json

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VERIFY = 4


def _add_platoon_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="sections-style config file; flags override its keys")
    p.add_argument("--scenario",
                   help='JSON scenario fragment {"n":…, "k":…, "refs":[…]}')
    p.add_argument("--n", type=int, help="vehicle count")
    p.add_argument("--k", type=int, help="connectivity index")
    p.add_argument("--arrangement", choices=experiments.ARRANGEMENTS,
                   help="reference arrangement (default md)")
    p.add_argument("--refs", help="explicit reference indices, e.g. '5,14,23,32'")
    p.add_argument("--position", type=int, help="reference position for arrangement=single")
    p.add_argument("--seed", type=int, help="seed for initial states and noise (default 0)")
    p.add_argument("--out", dest="outdir", help="output directory (default results)")
    p.add_argument("--emit-config", action="store_true",
                   help="print the effective merged config and exit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="platoonkit",
        description="Robustness analysis and delay simulation of k-nearest-neighbor platoons",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("report", help="robustness report (JSON + text summary)")
    _add_platoon_flags(p)
    p.add_argument("--gamma", type=float, help="also evaluate the gain-threshold predicates")
    p.add_argument("--sweep-csv", action="store_true", dest="sweep_csv",
                   help="also write the frequency-response CSVs")

    for name, title in (("sweep-remove", "drop each minimally-dense reference in turn"),
                        ("sweep-add", "promote each non-reference position in turn")):
        p = sub.add_parser(name, help=title)
        _add_platoon_flags(p)

    p = sub.add_parser("delay-grid", help="simulate both dynamics over a list of delays")
    _add_platoon_flags(p)
    p.add_argument("--taus", help="delay list, e.g. '0.05,0.09,0.1,0.4'")
    p.add_argument("--horizon", type=float, help="simulation horizon")
    p.add_argument("--step", type=float, help="integration step")

    p = sub.add_parser("scaling", help="gain growth with n: single end reference vs MD")
    _add_platoon_flags(p)
    p.add_argument("--ns", help="platoon sizes, e.g. '8,16,32,64,128' (>= 5 values)")

    p = sub.add_parser("simulate", help="one time-domain run, exported as CSV")
    _add_platoon_flags(p)
    p.add_argument("--dynamics", choices=("velocity", "formation"))
    p.add_argument("--tau", type=float, help="constant communication delay (default 0)")
    p.add_argument("--delay-mode", dest="delay_mode",
                   choices=("none", "full", "self-undelayed"))
    p.add_argument("--horizon", type=float)
    p.add_argument("--step", type=float)
    p.add_argument("--disturbance", choices=("none", "sin", "noise"))
    p.add_argument("--amplitude", type=float)
    p.add_argument("--omega", type=float, help="sinusoid frequency (rad/s)")

    p = sub.add_parser("verify", help="fast correctness battery (exit 4 on violation)")
    p.add_argument("--seed", type=int, default=0)

    return parser


_COMMAND_EXPERIMENT = {
    "report": "report",
    "sweep-remove": "add-remove",
    "sweep-add": "add-remove",
    "delay-grid": "delay-grid",
    "scaling": "scaling",
    "simulate": "simulate",
}


def _merge_config(args: argparse.Namespace) -> experiments.ScenarioConfig:
    raw = {}
    if getattr(args, "config", None):
        raw.update(experiments.load_config_file(args.config))
    if getattr(args, "scenario", None):
        try:
            with open(args.scenario) as fh:
                doc = fh.read()
        except OSError as exc:
            raise ParameterError(f"cannot read scenario file {args.scenario}: {exc}")
        top, refset = scenario_from_json(doc)
        raw.update(n=str(top.n), k=str(top.k), arrangement="explicit",
                   refs=" ".join(str(r) for r in refset.refs))
    for key in ("n", "k", "arrangement", "refs", "position", "seed", "outdir",
                "gamma", "sweep_csv", "taus", "horizon", "step", "ns",
                "dynamics", "tau", "delay_mode", "disturbance", "amplitude", "omega"):
        value = getattr(args, key, None)
        if value is not None and value is not False:
            raw[key] = value if not isinstance(value, bool) else "true"
    # the report subcommand honors a hinf-sweep experiment from the config
    # file; every other subcommand pins its own experiment
    if not (args.command == "report" and raw.get("experiment") == "hinf-sweep"):
        raw["experiment"] = _COMMAND_EXPERIMENT[args.command]
    if args.command == "report" and raw.get("sweep_csv") == "true":
        raw["experiment"] = "hinf-sweep"
    return experiments.finalize_config(raw)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            failures, lines = experiments.run_verify(seed=args.seed)
            print("\n".join(lines))
            if failures:
                print(f"verification FAILED: {len(failures)} check(s)", file=sys.stderr)
                return EXIT_VERIFY
            print("verification passed")
            return EXIT_OK

        cfg = _merge_config(args)
        if args.emit_config:
            print(experiments.emit_config(cfg), end="")
            return EXIT_OK
        outdir = Path(cfg.outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        if args.command == "report":
            paths = experiments.run_report(cfg, outdir)
        elif args.command == "sweep-remove":
            paths = experiments.run_remove_add_sweep(cfg, "remove", outdir)
        elif args.command == "sweep-add":
            paths = experiments.run_remove_add_sweep(cfg, "add", outdir)
        elif args.command == "delay-grid":
            paths = experiments.run_delay_grid(cfg, outdir)
        elif args.command == "scaling":
            paths = experiments.run_scaling(cfg, outdir)
        else:
            paths = experiments.run_simulate(cfg, outdir)
        for path in paths:
            print(f"wrote {path}")
        return EXIT_OK
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
