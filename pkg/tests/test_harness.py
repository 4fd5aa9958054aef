import csv
import io
import json
import math
from dataclasses import replace

import numpy as np
import pytest

from bbmv.bell import TSIRELSON, SettingsQuad, standard_quad
from bbmv.causal import reference_schedule
from bbmv.errors import ConfigError, StageError
from bbmv.harness import (
    AUDITS_FAILED,
    CONDITIONS_VIOLATED,
    LOCAL_NOT_EXCLUDED,
    QUANTUM_CONSISTENT,
    RunConfig,
    check_condition_4,
    default_run_config,
    depolarizing_breakeven,
    emit_report,
    exact_photon_chsh,
    load_config,
    locate_crossing,
    parse_report,
    report_verdict,
    round_sig,
    run_experiment,
    sweep,
    sweep_csv,
    with_field,
    write_atomic,
)
from bbmv.transfer import TransferConfig

SMALL = replace(default_run_config(), trials=40_000)


@pytest.fixture(scope="module")
def report():
    return run_experiment(SMALL)


class TestConfig:
    def test_defaults(self):
        cfg = default_run_config()
        assert cfg.trials == 1_000_000
        assert cfg.singlet_fidelity_threshold == 0.99
        assert cfg.significance == 1e-6
        assert cfg.settings == "optimize"

    def test_round_trip(self):
        cfg = replace(SMALL, settings=standard_quad(), model="local_lhv",
                      transfer=TransferConfig.depolarizing(0.1, 0.2))
        assert RunConfig.from_dict(cfg.to_dict()) == cfg
        assert RunConfig.from_dict(cfg.to_dict()).digest() == cfg.digest()

    def test_yaml_file(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text(
            "trials: 5000\n"
            "seed: 7\n"
            "model: setting_aware_lhv\n"
            "bmv:\n  mass1: 1e-14\n  dephasing_rate: 0.01\n"
            "transfer:\n  swap_fidelity_mode: depolarizing\n  depolarizing_probability_side1: 0.05\n"
            "schedule:\n  measure_2: {t: 30, x: 10}\n"
        )
        cfg = load_config(path)
        assert cfg.trials == 5000 and cfg.seed == 7 and cfg.model == "setting_aware_lhv"
        assert cfg.bmv.mass1 == 1e-14 and cfg.bmv.dephasing_rate == 0.01
        assert cfg.transfer.depolarizing_probability_side1 == 0.05
        assert cfg.transfer.depolarizing_probability_side2 == 0.0
        assert cfg.schedule["measure_2"].t == 30.0
        assert cfg.schedule["source"] == reference_schedule()["source"]

    def test_empty_file_is_default(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("")
        assert load_config(path) == default_run_config()

    @pytest.mark.parametrize("text", [
        "trials: -3\n",
        "model: psychic\n",
        "bogus_key: 1\n",
        "bmv:\n  mass1: heavy\n",
        "bmv:\n  mass1: -1\n",
        "settings: {a: 0}\n",
        "audits: [telepathy]\n",
        "[1, 2]\n",
        "trials: [\n",
    ])
    def test_invalid(self, tmp_path, text):
        path = tmp_path / "bad.yaml"
        path.write_text(text)
        with pytest.raises(ConfigError):
            load_config(path)

    def test_schedule_event_removed_with_null(self, tmp_path):
        path = tmp_path / "s.yaml"
        path.write_text("schedule:\n  record_1: null\n  record_2: null\n")
        assert not load_config(path).schedule.has("record_1")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.yaml")

    def test_with_field(self):
        cfg = with_field(SMALL, "transfer.depolarizing_probability", 0.3)
        t = cfg.transfer
        assert (t.swap_fidelity_mode, t.depolarizing_probability_side1, t.depolarizing_probability_side2) == (
            "depolarizing", 0.3, 0.3)
        assert with_field(SMALL, "bmv.dephasing_rate", 0.5).bmv.dephasing_rate == 0.5
        with pytest.raises(ConfigError):
            with_field(SMALL, "bmv.colour", 1)


class TestCondition4:
    def test_default_wiring(self):
        assert check_condition_4(SMALL).passed

    def test_crossed_wiring(self):
        result = check_condition_4(replace(SMALL, wiring={"wing1": "photon2", "wing2": "photon1"}))
        assert not result.passed
        assert len(result.messages) == 2

    def test_particle_measured(self):
        result = check_condition_4(replace(SMALL, wiring={"wing1": "photon1", "wing2": "particle2"}))
        assert "wing 2" in result.messages[0]


class TestRun:
    def test_default_verdict(self, report):
        assert report.verdict == QUANTUM_CONSISTENT
        assert report.exact["s_value_quantum"] == pytest.approx(TSIRELSON, abs=1e-9)
        assert abs(report.stage3.s_value - TSIRELSON) <= 4 * report.stage3.standard_error
        assert report.stage1["singlet_fidelity"] == pytest.approx(1.0, abs=1e-9)
        assert report.provenance["seed"] == SMALL.seed
        assert report.provenance["config_digest"] == SMALL.digest()

    def test_all_condition_checks_reported(self, report):
        assert set(report.condition_checks) == {"condition_1", "condition_2", "condition_3", "condition_4",
                                                "target_state"}
        assert all(c.passed for c in report.condition_checks.values())

    def test_verdict_rederivable(self, report):
        assert report_verdict(report) == report.verdict
        assert report_verdict(parse_report(emit_report(report))) == report.verdict

    def test_json_round_trip(self, report):
        text = emit_report(report)
        again = parse_report(text)
        assert again == report
        assert emit_report(again) == text

    def test_csv_summary(self, report):
        rows = list(csv.reader(io.StringIO(emit_report(report, "csv-summary"))))
        assert len(rows) == 6
        assert [r[0] for r in rows[1:]] == ["a,b", "a,b_prime", "a_prime,b", "a_prime,b_prime", "summary"]
        assert rows[-1][-1] == QUANTUM_CONSISTENT
        assert sum(int(r[1]) for r in rows[1:5]) == SMALL.trials

    def test_unknown_format(self, report):
        with pytest.raises(ValueError, match="unsupported"):
            emit_report(report, "xml")

    def test_reproducible_bytes(self, report):
        assert emit_report(run_experiment(SMALL)) == emit_report(report)
        assert emit_report(run_experiment(SMALL, workers=4)) == emit_report(report)

    def test_seed_changes_estimate(self, report):
        other = run_experiment(replace(SMALL, seed=SMALL.seed + 1))
        assert other.stage3.s_value != report.stage3.s_value

    def test_local_model_not_excluded(self):
        rep = run_experiment(replace(SMALL, model="local_lhv"))
        assert rep.verdict == LOCAL_NOT_EXCLUDED
        assert abs(rep.exact["s_value_model"]) == pytest.approx(2.0, abs=1e-12)

    def test_setting_aware_with_timelike_schedule(self):
        cfg = replace(SMALL, model="setting_aware_lhv", schedule=reference_schedule().moved("measure_2", t=30.0))
        rep = run_experiment(cfg)
        assert rep.verdict == AUDITS_FAILED
        assert rep.audit_results["locality"].status == "fail"
        assert abs(rep.stage3.s_value - TSIRELSON) <= 4 * rep.stage3.standard_error

    def test_conditions_outrank_audits(self):
        cfg = replace(SMALL, wiring={"wing1": "photon2", "wing2": "photon1"},
                      schedule=reference_schedule().moved("measure_2", t=30.0))
        assert run_experiment(cfg).verdict == CONDITIONS_VIOLATED

    def test_extra_coupling_violates(self):
        cfg = replace(SMALL, interactions=SMALL.interactions.with_coupling("photon1", "photon2", "other", 2))
        rep = run_experiment(cfg)
        assert rep.verdict == CONDITIONS_VIOLATED
        assert rep.condition_checks["condition_3"].status == "fail"

    def test_dephased_state_fails_target(self):
        cfg = replace(SMALL, bmv=replace(SMALL.bmv, dephasing_rate=0.01))
        rep = run_experiment(cfg)
        assert rep.condition_checks["target_state"].status == "fail"
        assert rep.verdict == CONDITIONS_VIOLATED

    def test_missing_records_counts_as_failed_audit(self):
        events = tuple(e for e in reference_schedule().events if not e.label.startswith("record"))
        from bbmv.causal import ExperimentSchedule
        rep = run_experiment(replace(SMALL, schedule=ExperimentSchedule(events)))
        assert rep.audit_results["collapse_locality"].status == "not_applicable"
        assert rep.verdict == AUDITS_FAILED

    def test_audits_can_be_deselected(self):
        cfg = replace(SMALL, audits=("locality", "freedom_of_choice"),
                      schedule=reference_schedule().moved("record_2", t=26.0))
        assert run_experiment(cfg).verdict == QUANTUM_CONSISTENT

    def test_fixed_settings(self):
        rep = run_experiment(replace(SMALL, settings=standard_quad()))
        assert rep.exact["s_value_quantum"] == pytest.approx(-TSIRELSON, abs=1e-9)
        assert rep.verdict == QUANTUM_CONSISTENT

    def test_no_detection_is_stage_error(self):
        with pytest.raises(StageError) as info:
            run_experiment(replace(SMALL, detection_prob=0.0))
        assert info.value.stage == "bell"

    def test_untunable_geometry_is_stage_error(self):
        from bbmv.bmv import BMVConfig
        cfg = replace(SMALL, bmv=BMVConfig.symmetric(1e-14, 2.5, 250e-6))
        with pytest.raises(StageError) as info:
            run_experiment(cfg)
        assert info.value.stage == "bmv"

    def test_untuned_symmetric_has_no_violation(self):
        from bbmv.bmv import BMVConfig
        cfg = replace(SMALL, bmv=BMVConfig.symmetric(1e-14, 2.5, 250e-6), tune_bmv=False,
                      singlet_fidelity_threshold=0.0)
        rep = run_experiment(cfg)
        assert abs(rep.exact["s_value_quantum"]) <= 2 + 1e-6
        assert rep.verdict == LOCAL_NOT_EXCLUDED


class TestRounding:
    def test_round_sig(self):
        assert round_sig(math.pi) == 3.14159265359
        assert round_sig({"x": [1.23456789012345e-20, 2]}) == {"x": [1.23456789012e-20, 2]}
        assert round_sig(True) is True
        assert round_sig(float("inf")) == float("inf")

    def test_idempotent(self, rng):
        for x in rng.normal(size=200) * 10.0 ** rng.integers(-30, 30, 200):
            once = round_sig(float(x))
            assert round_sig(once) == once
            assert json.loads(json.dumps(once)) == once


class TestSweep:
    def test_depolarized_pair_fails_target_state(self):
        rows = sweep(replace(SMALL, trials=20_000), "transfer.depolarizing_probability", [0.5])
        assert rows[0]["verdict"] == CONDITIONS_VIOLATED

    def test_exact_rows_match_closed_form(self):
        values = list(np.linspace(0, 1, 11))
        rows = sweep(SMALL, "transfer.depolarizing_probability", values, exact_only=True)
        for v, r in zip(values, rows):
            assert abs(r["exact_s_value"]) == pytest.approx(TSIRELSON * (1 - v) ** 2, abs=1e-9)

    def test_sampled_rows(self):
        cfg = replace(SMALL, trials=20_000, singlet_fidelity_threshold=0.0)
        rows = sweep(cfg, "transfer.depolarizing_probability", [0.0, 0.5])
        assert rows[0]["verdict"] == QUANTUM_CONSISTENT
        assert rows[1]["verdict"] == LOCAL_NOT_EXCLUDED
        lines = sweep_csv(rows).splitlines()
        assert len(lines) == 3 and lines[0].startswith("field,value")

    def test_dephasing_sweep(self):
        rows = sweep(SMALL, "bmv.dephasing_rate", [0.0, 0.01, 0.1], exact_only=True)
        s = [abs(r["exact_s_value"]) for r in rows]
        assert s[0] > s[1] > s[2]

    def test_breakeven(self):
        assert depolarizing_breakeven() == pytest.approx(1 - 2 ** -0.25, abs=1e-9)

    def test_locate_crossing(self):
        f = lambda p: 3 - 2 * p
        assert locate_crossing([0, 1], [3, 1], f) == pytest.approx(0.5, abs=1e-12)
        assert locate_crossing([0, 0.1], [3, 2.8], f) is None

    def test_exact_chsh_fixed_quad(self):
        assert exact_photon_chsh(SMALL, standard_quad()) == pytest.approx(-TSIRELSON, abs=1e-9)
        assert SettingsQuad(0, 1, 2, 3).angles() == (0.0, 1.0, 2.0, 3.0)


def test_write_atomic(tmp_path):
    path = tmp_path / "out.json"
    write_atomic(path, "one")
    write_atomic(path, "two")
    assert path.read_text() == "two"
    assert [p.name for p in tmp_path.iterdir()] == ["out.json"]
