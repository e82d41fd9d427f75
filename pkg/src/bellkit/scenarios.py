"""Scenario runners behind the CLI.

Each runner takes a resolved :class:`~bellkit.config.ScenarioConfig` and
returns a :class:`ScenarioResult`: a JSON-ready results record, Bell rows
for the comparison table, CSV plot data, figure makers and the list of
invariant breaches (anything that would signal a bug rather than a
statistical fluctuation).
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np

from bellkit import chameleon as cham
from bellkit import kernel, rng
from bellkit.config import ScenarioConfig, parse_angle, parse_angles, parse_ints
from bellkit.feasibility import (
    SymmetricPairFamily,
    extend_to_joint,
    feasibility_sweep,
    pair_bound_check,
    singlet_geometry_family,
)
from bellkit.geometry import bell_violation, chsh_quantum_max, theta_scan
from bellkit.probability import FiniteProbabilitySpace, build_nonlocal_model, dumps_space, single_space_bell_check

SIGMA_LIMIT = 4.0


@dataclass
class ScenarioResult:
    results: dict
    bell_rows: list[dict] = field(default_factory=list)
    files: dict[str, str] = field(default_factory=dict)
    figures: dict[str, Callable[[Path], Path]] = field(default_factory=dict)
    breaches: list[str] = field(default_factory=list)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def bell_row(label, regime, lhs, bound, seed, **extra) -> dict:
    return {"label": label, "regime": regime, "lhs": float(lhs), "bound": float(bound),
            "margin": float(lhs) - float(bound), "seed": seed, **extra}


def _fraction_out(x):
    return str(x) if isinstance(x, Fraction) else x


# --- inequalities ---------------------------------------------------------------------

_SHARED_FORMS = {
    "two_term+": lambda x, tol: kernel.two_term_bound(x[0], x[1], 1, tol),
    "two_term-": lambda x, tol: kernel.two_term_bound(x[0], x[1], -1, tol),
    "three_term+": lambda x, tol: kernel.three_term_bound(x[0], x[1], x[2], 1, tol),
    "three_term-": lambda x, tol: kernel.three_term_bound(x[0], x[1], x[2], -1, tol),
    "bell_three_sum": lambda x, tol: kernel.bell_three_sum(x[0], x[1], x[2], x[3], tol),
    "bell_signed_sum": lambda x, tol: kernel.bell_signed_sum(x[0], x[1], x[2], x[3], tol),
    "chsh_value": lambda x, tol: kernel.chsh_value(x[0], x[1], x[2], x[3], tol),
}


def _property_suite(x: np.ndarray, tol: float) -> dict:
    out = {}
    for name, form in _SHARED_FORMS.items():
        rep = form(x, tol)
        out[name] = {"violations": int(np.count_nonzero(~rep.holds)), "max_margin": float(np.max(rep.margin))}
    dec = kernel.chsh_four_sample(*x[:8], tol=tol)
    out["chsh_four_sample"] = {
        "violations": int(np.count_nonzero(~dec.holds)),
        "max_lhs": float(np.max(dec.lhs)),
        "exceeds_chsh": int(np.count_nonzero(dec.exceeds_chsh)),
    }
    return out


def lattice_checks(values=(-1.0, -0.5, 0.0, 0.5, 1.0), tol: float = kernel.TIGHT_TOL) -> dict:
    """Compare the numeric ``tight`` flag with the predicted equality sets
    on a small exact grid, and record a strict sign assignment for the
    signed sum on the {-1, 1} lattice."""
    def grid(k):
        return np.array(list(itertools.product(values, repeat=k))).T

    g2, g3, g4 = grid(2), grid(3), grid(4)
    checks = {}
    for sign in (1, -1):
        rep = kernel.two_term_bound(g2[0], g2[1], sign, tol)
        checks[f"two_term{'+' if sign > 0 else '-'}"] = bool(
            np.array_equal(rep.tight, kernel.two_term_equality_predicted(g2[0], g2[1])))
        rep = kernel.three_term_bound(*g3, sign=sign, tol=tol)
        checks[f"three_term{'+' if sign > 0 else '-'}"] = bool(
            np.array_equal(rep.tight, kernel.three_term_equality_predicted(*g3, sign=sign)))
    rep = kernel.bell_three_sum(*g4, tol=tol)
    checks["bell_three_sum"] = bool(np.array_equal(rep.tight, kernel.three_sum_equality_predicted(*g4)))

    pm = np.array(list(itertools.product((-1.0, 1.0), repeat=4))).T
    lat = kernel.bell_three_sum(*pm, tol=tol)
    signed = kernel.bell_signed_sum(*pm, tol=tol)
    strict = np.nonzero(~signed.tight)[0]
    witness = pm[:, strict[0]].tolist() if len(strict) else None
    return {
        "equality_sets_match": checks,
        "pm_lattice_three_sum_all_tight": bool(np.all(lat.tight)),
        "pm_lattice_signed_sum_holds": bool(np.all(signed.holds)),
        "signed_sum_strict_witness": witness,
        "signed_sum_strict_count": int(len(strict)),
    }


def run_inequalities(cfg: ScenarioConfig) -> ScenarioResult:
    p = cfg.parameters
    n, tol = p["samples"], cfg.tolerance
    uniform = kernel.random_tuples(rng.generator(cfg.seed, "inequalities", "uniform"), n, 8)
    enriched = kernel.random_tuples(rng.generator(cfg.seed, "inequalities", "boundary"), n, 8, boundary=0.5)
    results = {"samples": n, "uniform": _property_suite(uniform, tol), "boundary_enriched": _property_suite(enriched, tol)}
    breaches = [
        f"{suite}:{name} violated {rec['violations']} times"
        for suite in ("uniform", "boundary_enriched")
        for name, rec in results[suite].items()
        if rec["violations"]
    ]
    if p["lattice"]:
        lat = lattice_checks(tol=tol)
        results["lattice"] = lat
        breaches += [f"equality set mismatch: {k}" for k, ok in lat["equality_sets_match"].items() if not ok]
        if not (lat["pm_lattice_three_sum_all_tight"] and lat["pm_lattice_signed_sum_holds"]):
            breaches.append("sign lattice check failed")
        if lat["signed_sum_strict_witness"] is None:
            breaches.append("no strict sign assignment for the signed sum")

    shared = kernel.chsh_value(*uniform[:4], tol=tol).lhs
    decoupled = kernel.chsh_four_sample(*enriched, tol=tol).lhs
    rows = [
        bell_row("chsh shared factors (max)", "single-space", np.max(shared), 2.0, cfg.seed),
        bell_row("chsh four samples (max)", "separate-sample", np.max(decoupled), 2.0, cfg.seed),
    ]
    counts_s, edges = np.histogram(shared, bins=40, range=(0, 4))
    counts_d, _ = np.histogram(decoupled, bins=40, range=(0, 4))
    files = {"chsh_histogram.csv": csv_text(
        ["bin_left", "bin_right", "shared", "four_sample"],
        zip(edges[:-1].tolist(), edges[1:].tolist(), counts_s.tolist(), counts_d.tolist()))}
    figures = {"chsh_histogram.png": lambda path: _plot("decoupled_histogram", shared, decoupled, path)}
    return ScenarioResult(results, rows, files, figures, breaches)


# --- feasibility ----------------------------------------------------------------------

def family_record(family: SymmetricPairFamily) -> dict:
    pb = pair_bound_check(family)
    ext = extend_to_joint(family)
    rec = {
        "family": family.as_strings(),
        "pair_bound": pb.as_dict(),
        "feasible": ext.feasible,
    }
    if ext.feasible:
        rec["witness"] = ext.witness.as_dict()
        rec["witness_reproduces"] = ext.witness.reproduces(family)
    else:
        rec["certificate"] = ext.certificate.as_dict()
        rec["certificate_valid"] = ext.certificate.valid
    return rec


def run_feasibility(cfg: ScenarioConfig) -> ScenarioResult:
    p = cfg.parameters
    family = SymmetricPairFamily.parse(p["family"])
    rec = family_record(family)
    breaches = []
    if rec["feasible"] and not rec["witness_reproduces"]:
        breaches.append("witness does not reproduce the family")
    if not rec["feasible"] and not rec["certificate_valid"]:
        breaches.append("infeasibility certificate is invalid")
    if rec["feasible"] and not rec["pair_bound"]["holds"]:
        breaches.append("feasible family violates the three-pair inequality")
    results = {"family": rec}
    pb = pair_bound_check(family)
    rows = [bell_row(f"family {','.join(family.as_strings())}", "pair-family",
                     float(pb.lhs), float(pb.rhs), cfg.seed)]
    files, figures = {}, {}
    if p["sweep"]:
        sweep = feasibility_sweep(p["sweep"])
        results["sweep"] = {
            "denominator": sweep.denominator,
            "families": sweep.families,
            "feasible": sweep.feasible,
            "bound_holds": sweep.bound_holds,
            "unsound": [[str(v) for v in fam] for fam in sweep.unsound],
            "gap": len(sweep.gap),
            "witnesses_exact": sweep.witnesses_exact,
            "certificates_valid": sweep.certificates_valid,
            "facets_agree": sweep.facets_agree,
        }
        if sweep.unsound:
            breaches.append(f"{len(sweep.unsound)} feasible families violate the three-pair inequality")
        if not (sweep.witnesses_exact and sweep.certificates_valid and sweep.facets_agree):
            breaches.append("sweep produced an inexact witness or invalid certificate")
        files["sweep.csv"] = csv_text(
            ["p_ab", "p_bc", "p_ac", "bound_holds", "feasible"],
            ([*(str(v) for v in values), int(h), int(f)] for values, h, f in sweep.records))
        figures["feasibility_slice.png"] = lambda path: _feasibility_slice(sweep, path)
    return ScenarioResult(results, rows, files, figures, breaches)


def _feasibility_slice(sweep, path: Path) -> Path:
    m = sweep.denominator // 2 + 1
    grid = np.array([k / sweep.denominator for k in range(m)])
    target = Fraction(1, 4) if sweep.denominator % 4 == 0 else Fraction(0)
    feasible = np.zeros((m, m), dtype=bool)
    pb = np.zeros((m, m), dtype=bool)
    for values, h, f in sweep.records:
        if values[2] == target:
            i, j = int(values[0] * sweep.denominator), int(values[1] * sweep.denominator)
            feasible[i, j], pb[i, j] = f, h
    return _plot("feasibility_slice_figure", grid, feasible, pb, str(target), path)


# --- singlet scan ---------------------------------------------------------------------

def run_singlet_scan(cfg: ScenarioConfig) -> ScenarioResult:
    p, tol = cfg.parameters, cfg.tolerance
    scan = theta_scan(p["n"])
    a, b, c = parse_angle(p["a"]), parse_angle(p["b"]), parse_angle(p["c"])
    viol = bell_violation(a, b, c, tol)
    fam = singlet_geometry_family(a, b, c)
    pb = pair_bound_check(fam, tol)
    cmax = chsh_quantum_max(p["chsh_resolution"])
    results = {
        "theta_scan": {"n": p["n"], "max": scan.max, "argmax": scan.argmax, "step": scan.step},
        "bell_violation": viol.as_dict(),
        "pair_family": {"family": [float(v) for v in fam.values], "pair_bound": pb.as_dict()},
        "chsh_quantum_max": {
            "resolution": cmax.resolution,
            "value": cmax.value,
            "angles": list(cmax.angles),
            "refined_value": cmax.refined_value,
            "refined_angles": list(cmax.refined_angles),
        },
    }
    breaches = []
    if scan.max > math.sqrt(2) + tol:
        breaches.append(f"theta scan maximum {scan.max} exceeds sqrt(2)")
    if cmax.refined_value > 2 * math.sqrt(2) + 1e-9:
        breaches.append(f"CHSH maximum {cmax.refined_value} exceeds 2 sqrt(2)")
    rows = [
        bell_row("singlet |a.b+b.c| vs 1+a.c", "singlet", viol.lhs, viol.rhs, cfg.seed),
        bell_row("singlet CHSH max", "singlet", cmax.value, 2.0, cfg.seed),
    ]
    files = {"theta_scan.csv": csv_text(["theta", "value"], scan.rows())}
    figures = {"theta_scan.png": lambda path: _plot("theta_scan_figure", scan.theta, scan.value, path)}
    return ScenarioResult(results, rows, files, figures, breaches)


# --- chameleon ------------------------------------------------------------------------

def _bell_record(bell: cham.EmpiricalBell, runs) -> dict:
    rec = bell.as_dict()
    rec["correlations"] = {f"{r.pair[0]!r},{r.pair[1]!r}": r.empirical_corr for r in runs}
    rec["digests"] = [r.digest() for r in runs]
    return rec


def run_chameleon(cfg: ScenarioConfig) -> ScenarioResult:
    p, tol, seed = cfg.parameters, cfg.tolerance, cfg.seed
    a, b, c = parse_angle(p["a"]), parse_angle(p["b"]), parse_angle(p["c"])
    n = p["n"]
    fitted = cham.ChameleonModel(hidden=p["hidden"], policy="fitted")
    uniform = cham.ChameleonModel(hidden=p["hidden"], policy="uniform")
    breaches, rows, reps = [], [], []
    first_separate = None
    for r in range(p["repetitions"]):
        run1 = cham.run_pair_experiment(fitted, (a, b), n, seed, stream=f"separate:{r}:I", retain_lambda=r == 0)
        run2 = cham.run_pair_experiment(fitted, (c, b), n, seed, stream=f"separate:{r}:II")
        run3 = cham.run_pair_experiment(fitted, (a, c), n, seed, stream=f"separate:{r}:III")
        sep = cham.empirical_bell_expression(run1, run2, sign=1, run3=run3)
        s1 = cham.run_pair_experiment(uniform, (a, b), n, seed, stream=f"shared:{r}")
        s2 = cham.run_pair_experiment(uniform, (c, b), n, seed, stream=f"shared:{r}")
        single = cham.empirical_bell_expression(s1, s2, sign=1)
        if single.regime != "single-space":
            breaches.append(f"repetition {r}: shared-stream runs do not share hidden parameters")
        if single.margin > SIGMA_LIMIT * single.sigma + tol:
            breaches.append(f"repetition {r}: single-space Bell bound exceeded by {single.margin}")
        kept1, kept2, discarded = cham.cleaning(run1, run2)
        reps.append({
            "repetition": r,
            "separate_sample": _bell_record(sep, (run1, run2, run3)),
            "single_space": _bell_record(single, (s1, s2)),
            "cleaning": {
                "discarded": discarded,
                "kept": kept1.n,
                "correlations": [kept1.empirical_corr, kept2.empirical_corr] if kept1.n else None,
            },
        })
        rows.append(bell_row(f"rep {r}", sep.regime, sep.lhs, sep.bound, seed, sigma=sep.sigma))
        rows.append(bell_row(f"rep {r}", single.regime, single.lhs, single.bound, seed, sigma=single.sigma))
        if r == 0:
            first_separate = run1

    substitutions = []
    for z in [b] + parse_angles(p["substitutions"]):
        _, mismatch = cham.counterfactual_substitute(fitted, first_separate, b, z)
        frac = mismatch / first_separate.n
        pred = cham.predicted_mismatch(fitted, (a, b), z)
        sigma = math.sqrt(max(pred * (1 - pred), 0.0) / first_separate.n)
        substitutions.append({"measured": b, "substituted": z, "mismatch": mismatch, "fraction": frac,
                              "predicted": pred, "sigma": sigma})
        if z == b and mismatch:
            breaches.append("counterfactual substitution at the measured setting mismatched")

    probe_settings = np.arange(p["probe_settings"]) * (cham.TWO_PI / p["probe_settings"])
    probe_points = cham.hidden_points(p["hidden"], cham.UniformPolicy(), seed, "locality-probe", p["probe_lambdas"])
    local = cham.locality_probe(fitted, probe_settings, probe_points)
    if not local:
        breaches.append("locality probe detected remote-setting dependence")

    results = {
        "settings": {"a": a, "b": b, "c": c},
        "n": n,
        "hidden": p["hidden"],
        "repetitions": reps,
        "counterfactual": substitutions,
        "locality_probe": {"settings": len(probe_settings), "lambdas": p["probe_lambdas"], "passed": local},
    }
    pairs = {"(a,b)": a - b, "(c,b)": c - b, "(a,c)": a - c}
    corr_rows = []
    for rep in reps:
        for regime in ("separate_sample", "single_space"):
            for key, value in rep[regime]["correlations"].items():
                x, y = (float(t) for t in key.split(","))
                corr_rows.append([rep["repetition"], regime, x, y, x - y, value, -math.cos(x - y)])
    files = {
        "correlations.csv": csv_text(["repetition", "regime", "x", "y", "difference", "empirical", "singlet"],
                                     corr_rows),
        "counterfactual.csv": csv_text(["measured", "substituted", "mismatch", "fraction", "predicted", "sigma"],
                                       ([s["measured"], s["substituted"], s["mismatch"], s["fraction"],
                                         s["predicted"], s["sigma"]] for s in substitutions)),
    }
    figures = {
        "bell_margins.png": lambda path: _plot("bell_margin_figure", rows, path),
        "correlations.png": lambda path: _correlation_plot(uniform, corr_rows, pairs, path),
    }
    return ScenarioResult(results, rows, files, figures, breaches)


def _correlation_plot(model, corr_rows, pairs, path: Path) -> Path:
    d = np.linspace(-math.pi, math.pi, 181)
    phi = np.arange(4096) * (cham.TWO_PI / 4096)
    shared = [float(np.mean(model.product_on_circle(phi, t, 0.0))) for t in d]
    curves = {"singlet -cos": (d, -np.cos(d)), "one shared density": (d, np.array(shared))}
    points = [(r[4], r[5], r[1].replace("_", "-")) for r in corr_rows if r[0] == 0]
    return _plot("correlation_figure", curves, points, path)


# --- nonlocal demo --------------------------------------------------------------------

def run_nonlocal_demo(cfg: ScenarioConfig) -> ScenarioResult:
    directions = parse_angles(cfg.parameters["directions"])
    model = build_nonlocal_model(directions, exact=True)
    first, second = model.remote_sensitive()
    singlet = model.singlet_correlations()
    locality_free, singlet_form = model.bell_reports()
    a, b, c = directions[:3]
    d = directions[3] if len(directions) > 3 else b
    t23 = single_space_bell_check(model.space, model.S1(a), model.S1(c), model.S2(b), model.S2(d))
    results = {
        "directions": directions,
        "remote_sensitive": {"particle1": first, "particle2": second},
        "singlet_correlations": [[x, _fraction_out(v)] for x, v in singlet.items()],
        "bell": {"locality_free": locality_free.as_dict(), "singlet_form": singlet_form.as_dict()},
        "single_space_bell": [r.as_dict() for r in t23],
    }
    breaches = []
    if not (first and second):
        breaches.append("nonlocal model failed the remote-sensitivity probe")
    if any(v != -1 for v in singlet.values()):
        breaches.append("nonlocal model is not exactly anticorrelated")
    if not (locality_free.holds and singlet_form.holds and all(r.holds for r in t23)):
        breaches.append("nonlocal model violates a single-space Bell inequality")
    rows = [
        bell_row("|ab-cb| vs 1-<S1a S1c>", "single-space", locality_free.lhs, locality_free.rhs, cfg.seed),
        bell_row("|ab-cb| vs 1+<S1a S2c>", "single-space", singlet_form.lhs, singlet_form.rhs, cfg.seed),
    ]
    variables = {}
    for x in directions:
        variables[f"S1@{x!r}"] = model.S1(x)
        variables[f"S2@{x!r}"] = model.S2(x)
    labelled = FiniteProbabilitySpace([":".join(map(str, o)) for o in model.space.outcomes], model.space.weights)
    files = {"space.txt": dumps_space(labelled, variables)}
    return ScenarioResult(results, rows, files, {}, breaches)


# --- coincidence ----------------------------------------------------------------------

def run_coincidence(cfg: ScenarioConfig) -> ScenarioResult:
    ks, trials = parse_ints(cfg.parameters["k"]), cfg.parameters["trials"]
    records, breaches = [], []
    for k in ks:
        freq = cham.coincidence_protocol(k, trials, cfg.seed)
        expected = 1.0 / k
        sigma = math.sqrt(expected * (1 - expected) / trials)
        records.append({"k": k, "frequency": freq, "expected": expected, "sigma": sigma})
        if k == 1 and freq != 1.0:
            breaches.append("K=1 coincidence frequency is not 1")
    files = {"coincidence.csv": csv_text(["k", "frequency", "expected", "sigma"],
                                         ([r["k"], r["frequency"], r["expected"], r["sigma"]] for r in records))}
    figures = {"coincidence.png": lambda path: _plot("coincidence_figure", ks, [r["frequency"] for r in records],
                                                     path)}
    return ScenarioResult({"trials": trials, "coincidences": records}, [], files, figures, breaches)


def _plot(name: str, *args):
    # Imported lazily: matplotlib is only loaded when figures are requested.
    from bellkit import plotting

    return getattr(plotting, name)(*args)


RUNNERS: dict[str, Callable[[ScenarioConfig], ScenarioResult]] = {
    "inequalities": run_inequalities,
    "feasibility": run_feasibility,
    "singlet-scan": run_singlet_scan,
    "chameleon": run_chameleon,
    "nonlocal-demo": run_nonlocal_demo,
    "coincidence": run_coincidence,
}
