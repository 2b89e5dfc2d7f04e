import json
import os

import pytest

from anisofield.cli import build_parser, config_from_args, main
from anisofield.experiments import (ExperimentConfig, default_out_dir,
                                    params_from_dict, run_experiment,
                                    HittingScanParams, MetricCheckParams)


class TestConfigParsing:
    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown config keys"):
            params_from_dict(MetricCheckParams, {"hurst": [0.5], "bogus": 1})

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="unknown experiment kind"):
            ExperimentConfig.from_dict("frobnicate", {})

    def test_echo_round_trips(self):
        cfg = ExperimentConfig.from_dict(
            "hitting-scan", {"hurst": [0.75], "radii": [0.2, 0.1], "seed": 9})
        echoed = cfg.echo()
        again = ExperimentConfig.from_dict("hitting-scan", echoed)
        assert again == cfg
        assert echoed["radii"] == [0.2, 0.1] and echoed["seed"] == 9

    def test_set_override_json_typed(self):
        args = build_parser().parse_args(
            ["hitting-scan", "--set", "radii=[0.3,0.15]",
             "--set", "drift_kind=zero", "--seed", "4", "--out", "/tmp/x"])
        cfg = config_from_args(args)
        assert cfg.params.radii == (0.3, 0.15)
        assert cfg.params.drift_kind == "zero"
        assert cfg.seed == 4 and cfg.out_dir == "/tmp/x"

    def test_config_file_then_override(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"n_mc": 50, "radii": [0.2, 0.1]}))
        args = build_parser().parse_args(
            ["hitting-scan", "--config", str(path), "--set", "n_mc=75"])
        cfg = config_from_args(args)
        assert cfg.params.n_mc == 75 and cfg.params.radii == (0.2, 0.1)

    def test_default_out_dir_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("ANISOFIELD_OUT", str(tmp_path))
        assert default_out_dir("metric-check") == str(tmp_path / "metric-check")

    def test_workers_validated(self):
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict("metric-check", {"workers": 0})


class TestMainExitCodes:
    def test_success_prints_digests(self, tmp_path, capsys):
        rc = main(["chaining-check", "--out", str(tmp_path / "run")])
        assert rc == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["kind"] == "chaining-check"
        assert set(doc["outputs"]) == {"results.csv", "report.json"}
        assert (tmp_path / "run" / "manifest.json").exists()

    def test_refusal_exits_2_with_json_error(self, tmp_path, capsys):
        # a Hurst vector with Q >= d makes the polarity question vacuous
        rc = main(["polarity-scan", "--out", str(tmp_path / "run"),
                   "--set", "hurst=[0.4]", "--set", "n_mc=10"])
        assert rc == 2
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "Refusal"
        assert "Q < d" in err["message"]

    def test_bad_key_exits_2(self, tmp_path, capsys):
        rc = main(["metric-check", "--out", str(tmp_path / "run"),
                   "--set", "nope=1"])
        assert rc == 2
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "ValueError"


class TestReproducibility:
    @staticmethod
    def run(kind, overrides, out, seed=5, workers=1):
        data = dict(overrides)
        data.update(seed=seed, workers=workers, out_dir=str(out))
        cfg = ExperimentConfig.from_dict(kind, data)
        return run_experiment(cfg)

    def test_rerun_byte_identical(self, tmp_path):
        over = {"n_samples": 30, "n_grid": 5}
        m1 = self.run("field-sim", over, tmp_path / "a")
        m2 = self.run("field-sim", over, tmp_path / "b")
        assert m1.outputs == m2.outputs
        assert (tmp_path / "a" / "results.csv").read_bytes() == \
               (tmp_path / "b" / "results.csv").read_bytes()

    def test_worker_count_invariant(self, tmp_path):
        over = {"n_mc": 60, "radii": [0.2, 0.1]}
        m1 = self.run("hitting-scan", over, tmp_path / "w1", workers=1)
        m4 = self.run("hitting-scan", over, tmp_path / "w4", workers=4)
        assert m1.outputs == m4.outputs

    def test_seed_changes_data(self, tmp_path):
        over = {"n_samples": 30, "n_grid": 5}
        m1 = self.run("field-sim", over, tmp_path / "s1", seed=1)
        m2 = self.run("field-sim", over, tmp_path / "s2", seed=2)
        assert m1.outputs["results.csv"] != m2.outputs["results.csv"]

    def test_manifest_structure(self, tmp_path):
        self.run("calib-sim", {"n_replicates": 3, "V": 2.0, "step": 0.25},
                 tmp_path / "m")
        doc = json.loads((tmp_path / "m" / "manifest.json").read_text())
        assert doc["kind"] == "calib-sim"
        assert doc["version"]
        assert doc["config"]["seed"] == 5
        assert len(doc["outputs"]["results.csv"]) == 64
