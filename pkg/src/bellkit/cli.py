"""``bellkit`` command line.

Each scenario is a subcommand. Values come from, in increasing priority,
the built-in defaults, ``--config`` and explicit flags::

    bellkit singlet-scan --n 3
    bellkit chameleon --seed 7 --n 20000 --out-dir runs/c7 --figures
    bellkit chameleon --config runs/c7/chameleon.config.ini
    bellkit summary runs/*/*.report.json --regime single-space
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from bellkit import __version__
from bellkit.config import (
    GLOBAL_DEFAULTS,
    OUTPUT_DEFAULTS,
    PARAMETER_DEFAULTS,
    SCENARIO_IDS,
    ConfigError,
    ScenarioConfig,
    load_config,
)
from bellkit.reporting import EXIT_CONFIG, EXIT_OK, emit_summary, load_reports, run_scenario

HELP = {
    "inequalities": "random and lattice checks of the scalar Bell/CHSH inequalities",
    "feasibility": "joint-extension feasibility of a symmetric pair family",
    "singlet-scan": "singlet correlations: theta scan, Bell violation, CHSH maximum",
    "chameleon": "chameleon Monte Carlo: shared vs pair-dependent hidden samples",
    "nonlocal-demo": "a nonlocal model on one space that still obeys Bell",
    "coincidence": "coincidence frequency when observers pick among K directions",
}


def _global_flags() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    g = parent.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=None, help="top-level seed (default 0)")
    g.add_argument("--out-dir", default=None, help="directory for report files (default bellkit-out)")
    g.add_argument("--format", choices=("json", "csv"), default=None,
                   help="stdout rendering: full JSON report or CSV summary rows (default json)")
    g.add_argument("--tolerance", type=float, default=None, help="numeric tolerance (default 1e-12)")
    g.add_argument("--config", default=None, help="INI or JSON scenario config")
    g.add_argument("--figures", action=argparse.BooleanOptionalAction, default=None,
                   help="also render PNG figures")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bellkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"bellkit {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    parent = _global_flags()
    for scenario in SCENARIO_IDS:
        p = sub.add_parser(scenario, parents=[parent], help=HELP[scenario], description=HELP[scenario])
        for key, default in PARAMETER_DEFAULTS[scenario].items():
            flag = "--" + key.replace("_", "-")
            if isinstance(default, bool):
                p.add_argument(flag, dest=key, action=argparse.BooleanOptionalAction, default=None,
                               help=f"(default {default})")
            else:
                p.add_argument(flag, dest=key, type=type(default), default=None, help=f"(default {default})")
    s = sub.add_parser("summary", help="tabulate Bell rows from report files")
    s.add_argument("reports", nargs="*", help="*.report.json files")
    s.add_argument("--regime", action="append", default=None, help="keep only this regime (repeatable)")
    s.add_argument("--format", choices=("text", "csv"), default="text")
    return parser


def resolve_config(args: argparse.Namespace) -> ScenarioConfig:
    if args.config:
        base = load_config(args.config)
        if base.scenario != args.command:
            raise ConfigError(f"config is for {base.scenario!r}, not {args.command!r}")
    else:
        base = ScenarioConfig(args.command)
    params = dict(base.parameters)
    for key in PARAMETER_DEFAULTS[args.command]:
        value = getattr(args, key)
        if value is not None:
            params[key] = value
    settings = {k: getattr(base, k) for k in (*GLOBAL_DEFAULTS, *OUTPUT_DEFAULTS)}
    for key in (*GLOBAL_DEFAULTS, *OUTPUT_DEFAULTS):
        value = getattr(args, key)
        if value is not None:
            settings[key] = value
    return ScenarioConfig(args.command, params, **settings)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="bellkit: %(levelname)s: %(message)s")
    if args.command == "summary":
        try:
            reports = load_reports(args.reports)
        except (OSError, json.JSONDecodeError) as exc:
            logging.error("cannot read report: %s", exc)
            return EXIT_CONFIG
        sys.stdout.write(emit_summary(reports, args.regime, args.format))
        return EXIT_OK
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        logging.error("config error: %s", exc)
        return EXIT_CONFIG
    code = run_scenario(cfg)
    report_path = Path(cfg.out_dir) / f"{cfg.scenario}.report.json"
    if code != EXIT_CONFIG and report_path.exists():
        if cfg.format == "json":
            sys.stdout.write(report_path.read_text())
        else:
            sys.stdout.write(emit_summary(load_reports([report_path]), fmt="csv"))
    return code
