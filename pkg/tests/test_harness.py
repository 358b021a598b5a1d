import csv
import json

import numpy as np
import pytest

from tacosim import harness, taco


def table_config(**overrides) -> harness.ExperimentConfig:
    """Small explicit-table experiment for fast harness tests."""
    src = harness.ScenarioSource(
        kind="table", costs=[[0.0, 5.0, 1.0], [5.0, 0.0, 1.0], [2.0, 2.0, 0.0]]
    )
    defaults = dict(trials=20, master_seed=7, scenario=src, threads=1)
    defaults.update(overrides)
    return harness.ExperimentConfig(**defaults)


class TestSampling:
    def test_deterministic_per_trial(self):
        config = table_config()
        a = harness.sample_trial_params(config, 3)
        b = harness.sample_trial_params(config, 3)
        assert a == b

    def test_trials_differ(self):
        config = table_config()
        assert harness.sample_trial_params(config, 0) != harness.sample_trial_params(config, 1)

    def test_default_ranges(self):
        config = table_config(trials=400)
        for trial in range(400):
            p = harness.sample_trial_params(config, trial)
            assert all(1.0 <= r <= 20.0 for r in p.reserves)
            assert 0.1 <= p.kappa <= 100.0

    def test_exponent_mean_matches_uniform(self):
        # law of large numbers on the kappa exponent over 10^4 draws
        config = table_config(trials=10_000)
        ks = [
            np.log10(harness.sample_trial_params(config, t).kappa)
            for t in range(10_000)
        ]
        assert np.mean(ks) == pytest.approx(0.5, abs=0.03)


class TestRunMonteCarlo:
    def test_single_trial_fields(self):
        records = harness.run_monte_carlo(table_config(trials=1))
        assert len(records) == 1
        r = records[0]
        assert r.error is None
        assert r.r_term >= 1
        assert r.r_bound >= r.r_term
        assert r.cost_first > 0 and r.cost_final > 0
        assert "c-ctop" in r.baseline_costs and "voting" in r.baseline_costs
        assert r.wall_time > 0

    def test_thread_count_does_not_change_results(self, tmp_path):
        base = table_config(trials=24, threads=1)
        threaded = table_config(trials=24, threads=4)
        a = harness.run_monte_carlo(base)
        b = harness.run_monte_carlo(threaded)
        pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
        harness.export_results(a, "csv", pa)
        harness.export_results(b, "csv", pb)
        assert pa.read_bytes() == pb.read_bytes()

    def test_errors_recorded_not_raised(self):
        config = table_config(trials=4, taco=taco.TacoParams(max_steps=2))
        records = harness.run_monte_carlo(config)
        assert len(records) == 4
        assert any(r.error for r in records)

    def test_ctop_default_runs(self):
        config = harness.ExperimentConfig(trials=3, master_seed=1, threads=1)
        records = harness.run_monte_carlo(config)
        assert all(r.error is None for r in records)
        assert all("f-ctop" in r.baseline_costs for r in records)


class TestExport:
    def test_csv_columns_and_derived_values(self, tmp_path):
        records = harness.run_monte_carlo(table_config(trials=6))
        path = tmp_path / "out.csv"
        harness.export_results(records, "csv", path)
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0]) == harness.CSV_COLUMNS
        oversight_rows = [r for r in rows if r["mechanism"] == "oversight"]
        assert len(oversight_rows) == 6
        for row, record in zip(oversight_rows, records):
            assert float(row["cost_ratio"]) == pytest.approx(
                float(row["cost_final"]) / float(row["cost_first"])
            )
            b = [1.0 / (record.kappa * r) for r in record.reserves]
            assert float(row["b_mean"]) == pytest.approx(np.mean(b))
        mechanisms = {r["mechanism"] for r in rows}
        assert mechanisms == {"oversight", "c-ctop", "voting"}

    def test_json_round_trip(self, tmp_path):
        records = harness.run_monte_carlo(table_config(trials=5))
        path = tmp_path / "out.json"
        harness.export_results(records, "json", path)
        loaded = harness.records_from_json(path)
        assert loaded == records

    def test_json_metadata_has_terciles(self, tmp_path):
        records = harness.run_monte_carlo(table_config(trials=9))
        path = tmp_path / "out.json"
        harness.export_results(records, "json", path)
        with open(path) as fh:
            payload = json.load(fh)
        assert len(payload["metadata"]["b_group_terciles"]) == 2

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError):
            harness.export_results([], "xml", tmp_path / "x")


class TestConfigParsing:
    def test_mirrors_dataclass_fields(self):
        data = {
            "trials": 12,
            "master_seed": 5,
            "scenario": {"kind": "ctop", "sectors": 2, "flights": 3, "options": 2, "seed": 1},
            "reserve_range": [1.0, 20.0],
            "kappa_exponent_range": [-1.0, 2.0],
            "solver": {"kind": "exhaustive"},
            "taco": {"d0": 1.0, "gamma": 0.5},
            "threads": 2,
        }
        config = harness.config_from_dict(data)
        assert config.trials == 12
        assert config.scenario.flights == 3
        assert config.solver.kind == "exhaustive"
        assert config.taco.gamma == 0.5

    def test_validation(self):
        with pytest.raises(ValueError):
            harness.ExperimentConfig(trials=0)
        with pytest.raises(ValueError):
            harness.ExperimentConfig(reserve_range=(0.0, 20.0))
        with pytest.raises(ValueError):
            harness.ExperimentConfig(kappa_exponent_range=(2.0, -1.0))


class TestScenarioSources:
    def test_file_source(self, tmp_path):
        from tacosim import ctop, model

        instance = ctop.generate_scenario(2, 2, 2, seed=3)
        path = tmp_path / "inst.json"
        ctop.save_instance(instance, path)
        config = harness.ExperimentConfig(
            trials=2,
            master_seed=1,
            scenario=harness.ScenarioSource(kind="file", path=str(path)),
            threads=1,
        )
        records = harness.run_monte_carlo(config)
        assert all(r.error is None for r in records)
        assert harness.build_scenario(config).instance == instance

    def test_error_trials_export_cleanly(self, tmp_path):
        config = table_config(trials=3, taco=taco.TacoParams(max_steps=2))
        records = harness.run_monte_carlo(config)
        assert any(r.error for r in records)
        harness.export_results(records, "csv", tmp_path / "e.csv")
        harness.export_results(records, "json", tmp_path / "e.json")
        loaded = harness.records_from_json(tmp_path / "e.json")
        assert [r.error for r in loaded] == [r.error for r in records]
