import csv
import io
import json
import math

import pytest

from bellkit.cli import main
from bellkit.config import (
    ConfigError,
    ScenarioConfig,
    dumps_config,
    from_mapping,
    load_config,
    parse_angle,
)
from bellkit.reporting import EXIT_BREACH, EXIT_CONFIG, EXIT_OK, emit_summary, run_scenario
from bellkit.scenarios import ScenarioResult


def read_report(out, scenario):
    return json.loads((out / f"{scenario}.report.json").read_text())


class TestConfig:
    @pytest.mark.parametrize("text,value", [
        ("pi/4", math.pi / 4), ("3pi/4", 3 * math.pi / 4), ("-pi", -math.pi),
        ("2*pi/3", 2 * math.pi / 3), ("0.5", 0.5), (1, 1.0),
    ])
    def test_parse_angle(self, text, value):
        assert parse_angle(text) == pytest.approx(value)

    def test_parse_angle_rejects_garbage(self):
        with pytest.raises(ConfigError):
            parse_angle("north")

    def test_defaults_are_explicit(self):
        cfg = ScenarioConfig("chameleon")
        assert cfg.parameters["n"] == 100_000 and cfg.parameters["b"] == "pi/4"

    def test_unknown_scenario(self):
        with pytest.raises(ConfigError):
            ScenarioConfig("teleport")

    def test_unknown_parameter(self):
        with pytest.raises(ConfigError):
            ScenarioConfig("coincidence", {"kk": 3})

    def test_unknown_section_and_key(self):
        with pytest.raises(ConfigError):
            from_mapping({"scenario": {"id": "coincidence"}, "extra": {}})
        with pytest.raises(ConfigError):
            from_mapping({"scenario": {"id": "coincidence", "colour": "red"}})
        with pytest.raises(ConfigError):
            from_mapping({"scenario": {"id": "coincidence"}, "output": {"where": "x"}})

    def test_type_errors(self):
        with pytest.raises(ConfigError):
            ScenarioConfig("coincidence", {"trials": "many"})
        with pytest.raises(ConfigError):
            ScenarioConfig("inequalities", {"lattice": "maybe"})
        with pytest.raises(ConfigError):
            ScenarioConfig("coincidence", format="xml")

    def test_ini_round_trip(self, tmp_path):
        cfg = ScenarioConfig("chameleon", {"n": 500, "b": "pi/3"}, seed=7, out_dir=str(tmp_path), figures=True)
        path = tmp_path / "c.ini"
        path.write_text(dumps_config(cfg))
        again = load_config(path)
        assert again == cfg

    def test_json_input(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"scenario": {"id": "coincidence", "seed": 3},
                                    "parameters": {"k": "1,5", "trials": 10}}))
        cfg = load_config(path)
        assert cfg.seed == 3 and cfg.parameters == {"k": "1,5", "trials": 10}

    def test_unreadable(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.ini")
        bad = tmp_path / "bad.ini"
        bad.write_text("this is not ini")
        with pytest.raises(ConfigError):
            load_config(bad)


class TestScenarioCommands:
    def test_singlet_scan_rows(self, tmp_path, capsys):
        code = main(["singlet-scan", "--n", "3", "--chsh-resolution", "8", "--out-dir", str(tmp_path)])
        assert code == EXIT_OK
        rows = list(csv.reader((tmp_path / "singlet-scan.theta_scan.csv").read_text().splitlines()))
        assert rows[0] == ["theta", "value"]
        values = [(float(t), float(v)) for t, v in rows[1:]]
        expected = [(0.0, 1.0), (math.pi / 4, math.sqrt(2)), (math.pi / 2, 1.0)]
        for (t, v), (te, ve) in zip(values, expected):
            assert t == pytest.approx(te, abs=1e-15) and v == pytest.approx(ve, abs=1e-15)
        report = json.loads(capsys.readouterr().out)
        assert report["results"]["bell_violation"]["holds"] is False

    def test_feasibility_report(self, tmp_path):
        assert main(["feasibility", "--out-dir", str(tmp_path)]) == EXIT_OK
        rec = read_report(tmp_path, "feasibility")["results"]["family"]
        assert rec["family"] == ["0", "1/2", "1/2"]
        assert rec["feasible"] is False and rec["certificate_valid"] is True
        assert rec["pair_bound"] == {"lhs": "1", "rhs": "1/2", "holds": False,
                                  "correlation_form": {"lhs": "2", "rhs": "0", "holds": False}}

    def test_feasibility_witness(self, tmp_path):
        assert main(["feasibility", "--family", "1/2,1/2,1/2", "--out-dir", str(tmp_path)]) == EXIT_OK
        rec = read_report(tmp_path, "feasibility")["results"]["family"]
        assert rec["feasible"] and rec["witness"] == {"+++": "1/2", "---": "1/2"}

    def test_feasibility_sweep_files(self, tmp_path):
        assert main(["feasibility", "--sweep", "4", "--figures", "--out-dir", str(tmp_path)]) == EXIT_OK
        lines = (tmp_path / "feasibility.sweep.csv").read_text().splitlines()
        assert len(lines) == 1 + 27
        assert (tmp_path / "feasibility.feasibility_slice.png").stat().st_size > 0

    def test_coincidence_single_direction(self, tmp_path):
        assert main(["coincidence", "--k", "1", "--trials", "1000", "--out-dir", str(tmp_path)]) == EXIT_OK
        rec = read_report(tmp_path, "coincidence")["results"]["coincidences"][0]
        assert rec["frequency"] == 1.0

    def test_nonlocal_demo(self, tmp_path):
        assert main(["nonlocal-demo", "--out-dir", str(tmp_path)]) == EXIT_OK
        res = read_report(tmp_path, "nonlocal-demo")["results"]
        assert res["remote_sensitive"] == {"particle1": True, "particle2": True}
        assert all(v == "-1" for _, v in res["singlet_correlations"])

    def test_inequalities_small(self, tmp_path):
        assert main(["inequalities", "--samples", "2000", "--out-dir", str(tmp_path)]) == EXIT_OK
        res = read_report(tmp_path, "inequalities")["results"]
        assert res["boundary_enriched"]["chsh_four_sample"]["max_lhs"] > 2.0
        assert res["lattice"]["signed_sum_strict_witness"] is not None

    def test_chameleon_small_with_figures(self, tmp_path):
        args = ["chameleon", "--n", "5000", "--repetitions", "2", "--figures", "--format", "csv",
                "--out-dir", str(tmp_path)]
        assert main(args) == EXIT_OK
        for name in ("bell_margins.png", "correlations.png", "correlations.csv", "counterfactual.csv"):
            assert (tmp_path / f"chameleon.{name}").exists()

    def test_report_embeds_seed_and_fingerprint(self, tmp_path):
        main(["coincidence", "--seed", "11", "--trials", "100", "--out-dir", str(tmp_path)])
        report = read_report(tmp_path, "coincidence")
        assert report["seed"] == 11 and report["config"]["seed"] == 11
        assert report["fingerprint"].startswith("bellkit ") and "numpy" in report["fingerprint"]

    def test_config_then_flags(self, tmp_path):
        main(["coincidence", "--k", "3", "--trials", "100", "--out-dir", str(tmp_path)])
        cfg = tmp_path / "coincidence.config.ini"
        out2 = tmp_path / "second"
        assert main(["coincidence", "--config", str(cfg), "--trials", "50", "--out-dir", str(out2)]) == EXIT_OK
        params = read_report(out2, "coincidence")["config"]["parameters"]
        assert params == {"k": "3", "trials": 50}


class TestExitCodes:
    def test_bad_parameter_value(self, tmp_path):
        assert main(["feasibility", "--family", "2,0,0", "--out-dir", str(tmp_path)]) == EXIT_CONFIG

    def test_bad_angle(self, tmp_path):
        assert main(["singlet-scan", "--a", "left", "--out-dir", str(tmp_path)]) == EXIT_CONFIG

    def test_unreadable_config(self, tmp_path):
        assert main(["coincidence", "--config", str(tmp_path / "nope.ini")]) == EXIT_CONFIG

    def test_config_for_other_scenario(self, tmp_path):
        path = tmp_path / "c.ini"
        path.write_text(dumps_config(ScenarioConfig("coincidence")))
        assert main(["feasibility", "--config", str(path)]) == EXIT_CONFIG

    def test_invariant_breach(self, tmp_path, monkeypatch):
        from bellkit import scenarios

        def broken(cfg):
            return ScenarioResult({}, [], {}, {}, ["single-space Bell bound exceeded"])

        monkeypatch.setitem(scenarios.RUNNERS, "coincidence", broken)
        cfg = ScenarioConfig("coincidence", out_dir=str(tmp_path))
        assert run_scenario(cfg) == EXIT_BREACH
        assert read_report(tmp_path, "coincidence")["status"] == "breach"

    def test_internal_assertion_is_a_breach(self, tmp_path, monkeypatch):
        from bellkit import scenarios

        def broken(cfg):
            raise AssertionError("forms disagree")

        monkeypatch.setitem(scenarios.RUNNERS, "coincidence", broken)
        assert run_scenario(ScenarioConfig("coincidence", out_dir=str(tmp_path))) == EXIT_BREACH


class TestSummary:
    def _row(self, regime, margin, seed=0, scenario="chameleon", label="rep 0"):
        return {"scenario": scenario, "label": label, "regime": regime, "lhs": 1.0 + margin, "bound": 1.0,
                "margin": margin, "seed": seed}

    def test_one_row(self):
        text = emit_summary([{"bell_rows": [self._row("single-space", 0.0)]}])
        lines = text.splitlines()
        assert len(lines) == 2 and lines[0].split() == ["scenario", "label", "regime", "lhs", "bound", "margin",
                                                         "seed"]

    def test_header_only_after_filter(self):
        text = emit_summary([{"bell_rows": [self._row("single-space", 0.0)]}], regimes=["separate-sample"])
        assert len(text.splitlines()) == 1

    def test_empty_csv(self):
        assert emit_summary([], fmt="csv") == "scenario,label,regime,lhs,bound,margin,seed\n"

    def test_deterministic_ordering(self):
        rows = [self._row("single-space", 0.0, label="b"), self._row("separate-sample", 0.4, label="a"),
                self._row("pair-family", 0.5, scenario="feasibility")]
        one = emit_summary([{"bell_rows": rows}], fmt="csv")
        two = emit_summary([{"bell_rows": rows[::-1]}], fmt="csv")
        regimes = [r["regime"] for r in csv.DictReader(io.StringIO(one))]
        assert regimes == ["separate-sample", "single-space", "pair-family"]
        assert one == two

    def test_aligned_columns(self):
        text = emit_summary([{"bell_rows": [self._row("single-space", 0.0), self._row("separate-sample", 0.41)]}])
        widths = {len(ln) for ln in text.splitlines()}
        assert len(widths) == 1

    def test_chameleon_regimes_have_opposite_margins(self, tmp_path, capsys):
        main(["chameleon", "--n", "20000", "--repetitions", "1", "--out-dir", str(tmp_path)])
        capsys.readouterr()
        assert main(["summary", str(tmp_path / "chameleon.report.json"), "--format", "csv"]) == EXIT_OK
        rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
        margins = {r["regime"]: float(r["margin"]) for r in rows}
        assert margins["separate-sample"] > 0.3
        assert margins["single-space"] <= 0.0

    def test_unreadable_report(self, tmp_path):
        assert main(["summary", str(tmp_path / "missing.json")]) == EXIT_CONFIG
