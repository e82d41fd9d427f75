"""Run a scenario to report files, and tabulate Bell rows across reports.

A run writes into ``out_dir``:

* ``<scenario>.report.json``: resolved inputs, seed, version fingerprint,
  results, Bell rows and breaches (sorted keys, no timestamps)
* ``<scenario>.config.ini``: the resolved config, loadable with ``--config``
* ``<scenario>.<name>.csv`` (and other data files): plot-ready tables
* ``<scenario>.<name>.png`` when figures are requested
"""

from __future__ import annotations

import csv
import io
import json
import logging
import platform
from pathlib import Path

import numpy as np
import scipy

from bellkit import __version__
from bellkit.config import ConfigError, ScenarioConfig, dumps_config
from bellkit.scenarios import RUNNERS

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_BREACH = 0, 1, 2
SUMMARY_COLUMNS = ("scenario", "label", "regime", "lhs", "bound", "margin", "seed")


def fingerprint() -> str:
    return f"bellkit {__version__}; numpy {np.__version__}; scipy {scipy.__version__}; python {platform.python_version()}"


def build_report(cfg: ScenarioConfig) -> dict:
    """Execute the scenario and return the report record plus its side files.

    Raises :class:`ConfigError` for parameter values the runner rejects.
    """
    try:
        result = RUNNERS[cfg.scenario](cfg)
    except (ConfigError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    rows = [{"scenario": cfg.scenario, **row} for row in result.bell_rows]
    report = {
        "config": cfg.resolved(),
        "seed": cfg.seed,
        "fingerprint": fingerprint(),
        "results": result.results,
        "bell_rows": rows,
        "breaches": result.breaches,
        "status": "breach" if result.breaches else "ok",
        "data_files": sorted(f"{cfg.scenario}.{name}" for name in result.files),
    }
    return {"report": report, "files": result.files, "figures": result.figures}


def dumps_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def run_scenario(cfg: ScenarioConfig) -> int:
    """Run, write all report files, return the exit code (0 ok, 1 config, 2 breach)."""
    try:
        built = build_report(cfg)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (AssertionError, RuntimeError) as exc:
        log.error("invariant breach: %s", exc)
        return EXIT_BREACH
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = built["report"]
    (out / f"{cfg.scenario}.report.json").write_text(dumps_report(report))
    (out / f"{cfg.scenario}.config.ini").write_text(dumps_config(cfg))
    for name, text in built["files"].items():
        (out / f"{cfg.scenario}.{name}").write_text(text)
    if cfg.figures:
        for name, make in built["figures"].items():
            make(out / f"{cfg.scenario}.{name}")
    for breach in report["breaches"]:
        log.error("invariant breach: %s", breach)
    return EXIT_BREACH if report["breaches"] else EXIT_OK


def load_reports(paths) -> list[dict]:
    return [json.loads(Path(p).read_text()) for p in paths]


def summary_rows(reports: list[dict], regimes=None) -> list[dict]:
    """Bell rows of every report, filtered by regime, in a fixed order:
    by scenario, then regime, then position within the report."""
    rows = []
    for report in reports:
        for i, row in enumerate(report.get("bell_rows", [])):
            if regimes is None or row["regime"] in regimes:
                rows.append((row["scenario"], row["regime"], i, row))
    rows.sort(key=lambda t: t[:3])
    return [t[3] for t in rows]


def _cell(value) -> str:
    return f"{value:.6f}" if isinstance(value, float) else str(value)


def emit_summary(reports: list[dict], regimes=None, fmt: str = "text") -> str:
    """Side-by-side table of Bell values: header plus one line per row.

    ``fmt="csv"`` gives comma-separated values with full precision.
    """
    rows = summary_rows(reports, regimes)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        w.writerows([row[c] for c in SUMMARY_COLUMNS] for row in rows)
        return buf.getvalue()
    cells = [list(SUMMARY_COLUMNS)] + [[_cell(row[c]) for c in SUMMARY_COLUMNS] for row in rows]
    widths = [max(len(r[j]) for r in cells) for j in range(len(SUMMARY_COLUMNS))]
    numeric = {"lhs", "bound", "margin", "seed"}
    lines = []
    for r in cells:
        parts = [v.rjust(w) if c in numeric else v.ljust(w) for v, w, c in zip(r, widths, SUMMARY_COLUMNS)]
        lines.append("  ".join(parts).rstrip())
    return "\n".join(lines) + "\n"
