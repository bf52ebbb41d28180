"""Config validation, artifact layout, CLI exit codes, run comparison."""

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from epabc.cli import main, resolve_config
from epabc.errors import ConfigError, IncompatibleRuns
from epabc.runner import (
    compare_runs,
    generate_dataset,
    load_config,
    load_dataset,
    run_experiment,
    validate_config,
    write_dataset_csv,
)


def small_config(tmp_path, **overrides):
    cfg = {
        "model": {"id": "gaussian_iid", "n": 8, "params": {"sigma": 1.0},
                  "data": None, "true_params": [1.0]},
        "prior": {"mean": [0.0], "cov": [100.0]},
        "kernel": {"epsilon": 0.1, "norm": "euclidean", "summary": "identity"},
        "sampling": {"m_batch": 4000, "m_min": 500, "m_cap": 200000, "ess_min": 200,
                     "use_qmc": True, "qmc_table_len": 16384, "recycle": False},
        "ep": {"passes": 2, "alpha": 1.0, "min_pass_for_full_update": None,
               "on_failure": "skip_site"},
        "composite": None,
        "corrections": None,
        "baseline": None,
        "predictive": None,
        "seed": 3,
        "output": str(tmp_path / "out"),
    }
    cfg.update(overrides)
    return cfg


class TestConfigValidation:
    def test_unknown_top_level_field(self, tmp_path):
        cfg = small_config(tmp_path)
        cfg["surprise"] = 1
        with pytest.raises(ConfigError, match="surprise"):
            validate_config(cfg)

    def test_unknown_section_field(self, tmp_path):
        cfg = small_config(tmp_path)
        cfg["sampling"]["m_mystery"] = 7
        with pytest.raises(ConfigError, match="m_mystery"):
            validate_config(cfg)

    def test_unknown_model_id(self, tmp_path):
        cfg = small_config(tmp_path)
        cfg["model"]["id"] = "nope"
        with pytest.raises(ConfigError, match="nope"):
            validate_config(cfg)

    def test_missing_epsilon(self, tmp_path):
        cfg = small_config(tmp_path)
        del cfg["kernel"]["epsilon"]
        with pytest.raises(ConfigError, match="epsilon"):
            validate_config(cfg)

    def test_sv_needs_composite(self, tmp_path):
        cfg = small_config(tmp_path)
        cfg["model"]["id"] = "sv"
        with pytest.raises(ConfigError, match="composite"):
            validate_config(cfg)


class TestRunArtifacts:
    def test_run_writes_everything(self, tmp_path):
        cfg = small_config(tmp_path)
        result = run_experiment(cfg, tmp_path / "run1")
        for name in ("posterior.json", "run_meta.json", "trace.csv"):
            assert (tmp_path / "run1" / name).exists()
        post = result.posterior
        assert post["n_sites"] == 8
        assert len(post["sites"]) == 8
        assert post["sim_draws_total"] == sum(post["sim_draws_by_pass"].values())
        trace = (tmp_path / "run1" / "trace.csv").read_text().strip().splitlines()
        assert len(trace) == 1 + 2 * 8  # header + passes*n

    def test_byte_identical_reruns(self, tmp_path):
        cfg = small_config(tmp_path)
        run_experiment(cfg, tmp_path / "a", seed=9)
        run_experiment(cfg, tmp_path / "b", seed=9)
        assert (tmp_path / "a" / "posterior.json").read_bytes() == \
            (tmp_path / "b" / "posterior.json").read_bytes()

    def test_seed_changes_posterior(self, tmp_path):
        cfg = small_config(tmp_path)
        run_experiment(cfg, tmp_path / "a", seed=9)
        run_experiment(cfg, tmp_path / "b", seed=10)
        assert (tmp_path / "a" / "posterior.json").read_bytes() != \
            (tmp_path / "b" / "posterior.json").read_bytes()

    def test_meta_round_trips_through_validator(self, tmp_path):
        cfg = small_config(tmp_path)
        run_experiment(cfg, tmp_path / "a", seed=9)
        meta = json.loads((tmp_path / "a" / "run_meta.json").read_text())
        revalidated = validate_config(meta["config"])
        run_experiment(revalidated, tmp_path / "c", seed=9)
        assert (tmp_path / "a" / "posterior.json").read_bytes() == \
            (tmp_path / "c" / "posterior.json").read_bytes()

    def test_volume_correction_recorded(self, tmp_path):
        cfg = small_config(tmp_path)
        result = run_experiment(cfg, tmp_path / "v")
        post = result.posterior
        assert post["log_volume_correction"] == pytest.approx(8 * np.log(0.2))
        assert post["log_evidence"] == pytest.approx(
            post["log_evidence_raw"] - post["log_volume_correction"]
        )


class TestDatasets:
    def test_csv_round_trip(self, tmp_path):
        cfg = small_config(tmp_path)
        path = write_dataset_csv(cfg, tmp_path / "data.csv")
        chunks, cond = load_dataset("gaussian_iid", path)
        assert len(chunks) == 8
        assert cond is None
        direct, _, _ = generate_dataset(cfg, 3)
        np.testing.assert_allclose(np.concatenate(chunks), np.concatenate(direct))

    def test_race_csv_has_condition_column(self, tmp_path):
        cfg = small_config(tmp_path)
        cfg["model"] = {"id": "race", "n": 12,
                        "params": {"conditions": 2, "trials_per_condition": 6},
                        "data": None,
                        "true_params": [0.0, 0.05, 0.02, 0.04, 6.0, 4.5, 0.0]}
        cfg["prior"] = {"mean": [0.0] * 7, "cov": [1.0] * 7}
        path = write_dataset_csv(cfg, tmp_path / "race.csv")
        chunks, cond = load_dataset("race", path)
        assert len(chunks) == 12
        np.testing.assert_array_equal(np.unique(cond), [0, 1])

    def test_run_from_csv_matches_generated(self, tmp_path):
        cfg = small_config(tmp_path)
        path = write_dataset_csv(cfg, tmp_path / "data.csv")  # synthesized at the config seed
        cfg_file = dict(cfg)
        cfg_file["model"] = dict(cfg["model"], data=str(path), true_params=None)
        r1 = run_experiment(cfg, tmp_path / "gen", seed=3)
        r2 = run_experiment(cfg_file, tmp_path / "csv", seed=3)
        np.testing.assert_allclose(
            r1.posterior["global"]["moment"]["mean"],
            r2.posterior["global"]["moment"]["mean"],
        )


class TestCli:
    def test_run_and_compare(self, tmp_path):
        cfg = small_config(tmp_path)
        cfg_path = tmp_path / "exp.cfg"
        cfg_path.write_text(json.dumps(cfg))
        assert main(["run", str(cfg_path), "--out", str(tmp_path / "r1"), "--seed", "5"]) == 0
        assert main(["run", str(cfg_path), "--out", str(tmp_path / "r2"), "--seed", "6"]) == 0
        table = compare_runs([tmp_path / "r1", tmp_path / "r2"])
        assert table.splitlines()[0].startswith("run,model,coord")
        assert len(table.strip().splitlines()) == 3

    def test_compare_rejects_single_run(self, tmp_path):
        with pytest.raises(IncompatibleRuns):
            compare_runs([tmp_path])

    def test_compare_rejects_model_mismatch(self, tmp_path):
        cfg = small_config(tmp_path)
        cfg_path = tmp_path / "exp.cfg"
        cfg_path.write_text(json.dumps(cfg))
        main(["run", str(cfg_path), "--out", str(tmp_path / "r1")])
        toy = small_config(tmp_path)
        toy["model"] = {"id": "multimodal_toy", "n": 6, "params": {}, "data": None,
                        "true_params": [2.0]}
        toy_path = tmp_path / "toy.cfg"
        toy_path.write_text(json.dumps(toy))
        main(["run", str(toy_path), "--out", str(tmp_path / "r2")])
        with pytest.raises(IncompatibleRuns):
            compare_runs([tmp_path / "r1", tmp_path / "r2"])

    def test_bad_config_exit_code(self, tmp_path):
        cfg = small_config(tmp_path)
        cfg["model"]["id"] = "unknown_model"
        cfg_path = tmp_path / "bad.cfg"
        cfg_path.write_text(json.dumps(cfg))
        assert main(["run", str(cfg_path)]) == 2
        assert not (tmp_path / "out").exists()

    def test_gen_data_command(self, tmp_path):
        cfg = small_config(tmp_path)
        cfg_path = tmp_path / "exp.cfg"
        cfg_path.write_text(json.dumps(cfg))
        assert main(["gen-data", str(cfg_path), "--out", str(tmp_path / "d.csv")]) == 0
        assert (tmp_path / "d.csv").read_text().startswith("y")

    def test_bundled_configs_resolve_and_validate(self):
        for name in ("gaussian_toy", "multimodal_toy", "alpha_stable", "lv_desk",
                     "rt_desk", "rt_difficult", "sv_composite"):
            cfg = load_config(resolve_config(name))
            assert cfg["model"]["id"]

    def test_console_entry_point(self, tmp_path):
        out = subprocess.run([sys.executable, "-m", "epabc.cli", "compare", str(tmp_path)],
                             capture_output=True, text=True)
        assert out.returncode == 2


class TestThreads:
    def test_threaded_run_is_deterministic_per_thread_count(self, tmp_path):
        cfg = small_config(tmp_path)
        a = run_experiment(cfg, tmp_path / "t2a", seed=7, threads=2)
        b = run_experiment(cfg, tmp_path / "t2b", seed=7, threads=2)
        assert (tmp_path / "t2a" / "posterior.json").read_bytes() == \
            (tmp_path / "t2b" / "posterior.json").read_bytes()
