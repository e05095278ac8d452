"""Command-line surface: determinism, exit codes, end-to-end pipeline."""

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from sadvae import seeding
from sadvae.cli import main
from sadvae.data import RunConfig, save_config
from sadvae.evaluation import harmonic_mean
from sadvae.formats import read_feature_matrix
from sadvae.model import ModelDims, init_model, load_model_state, posterior_means, save_model_state

TINY_GEN = ["--classes", "12", "--samples-per-class", "24", "--d-x", "20",
            "--d-y", "10", "--signal-dim", "5", "--nuisance-dim", "10"]


def tiny_config(tmp_path, **overrides) -> str:
    base = dict(dim_r=8, dim_v=3, learning_rate=1e-3, batch_size=16, epochs=2,
                lambda_2=0.011, n_d=5, samples_per_class=40, seed=0)
    base.update(overrides)
    path = tmp_path / "config.json"
    save_config(RunConfig(**base), path)
    return str(path)


def dir_snapshot(root: Path) -> dict:
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """gen-synth -> train -> calibrate artifacts shared by several tests."""
    root = tmp_path_factory.mktemp("cli_pipeline")
    data = root / "data"
    run = root / "run"
    cal = root / "cal"
    config = tiny_config(root)
    assert main(["gen-synth", "--out", str(data), "--seed", "3", *TINY_GEN]) == 0
    manifest = str(data / "manifest.json")
    assert main(["train", "--manifest", manifest, "--config", config,
                 "--unseen", "3", "--split-seed", "1", "--out", str(run),
                 "--seed", "5"]) == 0
    assert main(["calibrate", "--manifest", manifest, "--config", config,
                 "--unseen", "3", "--split-seed", "1", "--out", str(cal),
                 "--seed", "5", "--model", str(run / "checkpoint.sadm")]) == 0
    return {"root": root, "manifest": manifest, "config": config,
            "run": run, "cal": cal}


class TestGenSynth:
    def test_deterministic_directories(self, tmp_path):
        for tag in ("a", "b"):
            assert main(["gen-synth", "--out", str(tmp_path / tag), "--seed", "7",
                         *TINY_GEN]) == 0
        assert dir_snapshot(tmp_path / "a") == dir_snapshot(tmp_path / "b")


class TestTrain:
    def test_zero_epochs_equals_fresh_init(self, tmp_path):
        data = tmp_path / "data"
        assert main(["gen-synth", "--out", str(data), "--seed", "2", *TINY_GEN]) == 0
        config = tiny_config(tmp_path, epochs=0, seed=4)
        out = tmp_path / "run"
        assert main(["train", "--manifest", str(data / "manifest.json"),
                     "--config", config, "--unseen", "3", "--split-seed", "0",
                     "--out", str(out), "--seed", "4"]) == 0
        fresh = init_model(ModelDims(20, 10, 8, 3), seeding.stream(4, seeding.INIT))
        ref = tmp_path / "fresh.sadm"
        save_model_state(fresh, ref)
        assert ref.read_bytes() == (out / "checkpoint.sadm").read_bytes()

    def test_rerun_byte_identical(self, tmp_path):
        data = tmp_path / "data"
        assert main(["gen-synth", "--out", str(data), "--seed", "2", *TINY_GEN]) == 0
        config = tiny_config(tmp_path)
        snapshots = []
        for tag in ("r1", "r2"):
            out = tmp_path / tag
            assert main(["train", "--manifest", str(data / "manifest.json"),
                         "--config", config, "--unseen", "3", "--split-seed", "0",
                         "--out", str(out), "--seed", "9"]) == 0
            snapshots.append(dir_snapshot(out))
        assert snapshots[0] == snapshots[1]


class TestEvaluationCommands:
    def test_eval_zsl(self, pipeline, tmp_path):
        out = tmp_path / "zsl"
        assert main(["eval-zsl", "--manifest", pipeline["manifest"],
                     "--config", pipeline["config"], "--unseen", "3",
                     "--split-seed", "1", "--out", str(out), "--seed", "5",
                     "--model", str(pipeline["run"] / "checkpoint.sadm")]) == 0
        report = json.loads((out / "report.json").read_text())
        assert 0.0 <= report["zsl_accuracy"] <= 100.0
        assert len(report["unseen_ids"]) == 3

    def test_eval_gzsl_harmonic_consistency(self, pipeline, tmp_path):
        out = tmp_path / "gzsl"
        assert main(["eval-gzsl", "--manifest", pipeline["manifest"],
                     "--unseen", "3", "--split-seed", "1", "--out", str(out),
                     "--seed", "5",
                     "--predictor", str(pipeline["cal"] / "predictor.sadc")]) == 0
        report = json.loads((out / "report.json").read_text())
        for key in ("acc_seen", "acc_unseen", "harmonic_mean"):
            assert key in report
        recomputed = harmonic_mean(report["acc_seen"], report["acc_unseen"])
        assert report["harmonic_mean"] == pytest.approx(recomputed, abs=1e-9)

    def test_export_latents(self, pipeline, tmp_path):
        out = tmp_path / "latents"
        assert main(["export-latents", "--manifest", pipeline["manifest"],
                     "--out", str(out), "--seed", "0",
                     "--model", str(pipeline["run"] / "checkpoint.sadm")]) == 0
        semantic = read_feature_matrix(out / "semantic_means.sadv")
        style = read_feature_matrix(out / "style_means.sadv")
        assert semantic.shape == (12 * 24, 8)
        assert style.shape == (12 * 24, 3)
        state = load_model_state(pipeline["run"] / "checkpoint.sadm")
        from sadvae.data import load_dataset

        dataset = load_dataset(pipeline["manifest"])
        expected_semantic, _ = posterior_means(state.skeleton_encoder, dataset.skeleton)
        np.testing.assert_allclose(semantic, expected_semantic.astype(np.float32),
                                   rtol=1e-6)


class TestProtocolAblateSearch:
    def test_protocol_single_repeat(self, pipeline, tmp_path):
        out = tmp_path / "protocol"
        assert main(["protocol", "--manifest", pipeline["manifest"],
                     "--config", pipeline["config"], "--unseen", "3",
                     "--split-seed", "2", "--out", str(out), "--seed", "5",
                     "--repeats", "1"]) == 0
        lines = (out / "repeats.csv").read_text().strip().splitlines()
        assert len(lines) == 3  # header + repeat + average
        assert lines[-1].startswith("average")
        report = json.loads((out / "report.json").read_text())
        assert report["mean_harmonic_mean"] == report["per_repeat"][0]["harmonic_mean"]

    def test_ablate_zsl_only(self, pipeline, tmp_path):
        out = tmp_path / "ablate"
        assert main(["ablate", "--manifest", pipeline["manifest"],
                     "--config", pipeline["config"], "--unseen", "3",
                     "--split-seed", "1", "--out", str(out), "--seed", "5",
                     "--zsl-only"]) == 0
        lines = (out / "ablation.csv").read_text().strip().splitlines()
        assert len(lines) == 4  # header + 3 variants
        report = json.loads((out / "report.json").read_text())
        assert [r["variant"] for r in report["results"]] == ["naive", "fd", "fd_tc"]

    def test_search_tiny_trials(self, pipeline, tmp_path):
        out = tmp_path / "search"
        assert main(["search", "--manifest", pipeline["manifest"],
                     "--config", pipeline["config"], "--unseen", "3",
                     "--split-seed", "1", "--out", str(out), "--seed", "5",
                     "--trials", "1,2"]) == 0
        lines = (out / "trials.csv").read_text().strip().splitlines()
        assert len(lines) == 4  # header + 3 trials
        assert (out / "best_config.json").exists()


class TestErrors:
    def test_unknown_subcommand_usage_error(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["frobnicate"])
        assert excinfo.value.code == 2

    def test_unknown_flag_usage_error(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["gen-synth", "--out", "x", "--frobnicate"])
        assert excinfo.value.code == 2

    def test_missing_manifest_runtime_error(self, tmp_path, capsys):
        code = main(["train", "--manifest", str(tmp_path / "nope.json"),
                     "--unseen", "3", "--out", str(tmp_path / "o"), "--seed", "0"])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_corrupt_checkpoint_runtime_error(self, pipeline, tmp_path, capsys):
        bad = tmp_path / "bad.sadm"
        bad.write_bytes(b"JUNKJUNKJUNK")
        code = main(["eval-zsl", "--manifest", pipeline["manifest"],
                     "--unseen", "3", "--split-seed", "1",
                     "--out", str(tmp_path / "o"), "--seed", "0",
                     "--model", str(bad)])
        assert code == 1
        assert "error:" in capsys.readouterr().err


class TestModuleEntryPoint:
    def test_python_dash_m_invocation(self, tmp_path):
        env_root = Path(__file__).resolve().parents[1]
        result = subprocess.run(
            [sys.executable, "-m", "sadvae", "gen-synth", "--out",
             str(tmp_path / "d"), "--seed", "1", *TINY_GEN],
            capture_output=True, text=True,
            env={"PYTHONPATH": str(env_root / "src"), "PATH": "/usr/bin:/bin"},
        )
        assert result.returncode == 0, result.stderr
        assert (tmp_path / "d" / "manifest.json").exists()
