import json

import numpy as np
import pytest

from fenec import build_task_stream, load_split, write_feature_file
from fenec.cli import main

from conftest import make_blobs


@pytest.fixture
def workspace(tmp_path, rng):
    """Feature files, a 3-task split, and a config for a 6-class blob set."""
    centers = np.array(
        [[0, 0], [30, 0], [0, 30], [30, 30], [15, 60], [60, 15]], dtype=float
    ) + 100.0
    train = make_blobs(centers, 40, 1.0, rng)
    test = make_blobs(centers, 15, 1.0, rng)
    write_feature_file(train, tmp_path / "train.fenc")
    write_feature_file(test, tmp_path / "test.fenc")
    (tmp_path / "split.json").write_text(json.dumps([[0, 1], [2, 3], [4, 5]]))
    config = {
        "method": "fenec",
        "train_features": "train.fenc",
        "test_features": "test.fenc",
        "splits": ["split.json"],
        "seeds": [0],
        "hyperparams": {
            "n_clusters": 2,
            "n_neighbors": 3,
            "tukey_lambda": 0.5,
            "gamma1": 1.0,
            "gamma2": 0.5,
            "shrink_repetitions": 1,
            "metric": "mahalanobis",
            "sample_normalize": False,
            "learning_rate": None,
        },
    }
    (tmp_path / "config.json").write_text(json.dumps(config))
    return tmp_path, config


def write_config(tmp_path, config, name="config.json"):
    (tmp_path / name).write_text(json.dumps(config))
    return str(tmp_path / name)


class TestRun:
    def test_run_writes_reports_and_summary(self, workspace):
        root, _ = workspace
        out = root / "out"
        assert main(["run", "--config", str(root / "config.json"), "--out", str(out)]) == 0
        report = json.loads((out / "report_0.json").read_text())
        assert len(report["per_task_accuracy"]) == 3
        summary = json.loads((out / "summary.json").read_text())
        assert summary["reports"] == ["report_0.json"]
        assert (out / "curves.csv").exists()

    def test_two_runs_are_byte_identical(self, workspace):
        root, _ = workspace
        cfg = str(root / "config.json")
        assert main(["run", "--config", cfg, "--out", str(root / "a")]) == 0
        assert main(["run", "--config", cfg, "--out", str(root / "b")]) == 0
        for name in ("report_0.json", "summary.json", "curves.csv"):
            assert (root / "a" / name).read_bytes() == (root / "b" / name).read_bytes()

    def test_summary_config_echo_reruns_identically(self, workspace):
        root, _ = workspace
        cfg = str(root / "config.json")
        assert main(["run", "--config", cfg, "--out", str(root / "a")]) == 0
        echoed = json.loads((root / "a" / "summary.json").read_text())["config"]
        echoed.pop("output_dir")
        rerun_cfg = write_config(root, echoed, "echoed.json")
        assert main(["run", "--config", rerun_cfg, "--out", str(root / "b")]) == 0
        assert (root / "a" / "report_0.json").read_bytes() == (
            root / "b" / "report_0.json"
        ).read_bytes()

    def test_dry_run_prints_parameter_count(self, workspace, capsys):
        root, _ = workspace
        assert main(["run", "--config", str(root / "config.json"), "--dry-run"]) == 0
        info = json.loads(capsys.readouterr().out)
        # 6 classes, 2 features, 2 clusters: 6 * 2 * (2 + 2).
        assert info["parameter_count"] == 48
        assert info["n_classes"] == 6
        assert info["n_features"] == 2

    def test_missing_feature_file_exits_3_with_path(self, workspace, capsys):
        root, config = workspace
        config["train_features"] = "absent.fenc"
        cfg = write_config(root, config, "broken.json")
        assert main(["run", "--config", cfg, "--out", str(root / "out")]) == 3
        assert "absent.fenc" in capsys.readouterr().err

    def test_unknown_config_key_exits_2(self, workspace):
        root, config = workspace
        config["hyperparams"]["gama1"] = 3.0
        cfg = write_config(root, config, "typo.json")
        assert main(["run", "--config", cfg]) == 2

    def test_invalid_json_exits_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["run", "--config", str(bad)]) == 2

    def test_seed_flag_overrides_config(self, workspace):
        root, _ = workspace
        cfg = str(root / "config.json")
        out = root / "out"
        assert main(["run", "--config", cfg, "--out", str(out), "--seed", "3", "--seed", "4"]) == 0
        assert (out / "report_3.json").exists()
        assert (out / "report_4.json").exists()

    def test_conditioning_failure_exits_4(self, tmp_path, rng):
        # Two perfectly correlated features and zero shrinkage cannot be
        # inverted; the run must fail with the numerical exit code.
        col = rng.normal(size=(40, 1)) + 50.0
        feats = np.hstack([col, col])
        labels = np.repeat([0, 1], 20)
        from fenec import FeatureBatch

        write_feature_file(FeatureBatch(feats, labels), tmp_path / "train.fenc")
        write_feature_file(FeatureBatch(feats, labels), tmp_path / "test.fenc")
        (tmp_path / "split.json").write_text(json.dumps([[0, 1]]))
        config = {
            "method": "fenec",
            "train_features": "train.fenc",
            "test_features": "test.fenc",
            "splits": ["split.json"],
            "seeds": [0],
            "hyperparams": {"n_clusters": 1, "n_neighbors": 1, "gamma1": 0.0, "gamma2": 0.0},
        }
        cfg = write_config(tmp_path, config)
        assert main(["run", "--config", cfg, "--out", str(tmp_path / "out")]) == 4


class TestFitEval:
    def test_fit_then_eval_matches_run_accuracies(self, workspace, capsys):
        root, _ = workspace
        cfg = str(root / "config.json")
        out = root / "out"
        assert main(["run", "--config", cfg, "--out", str(out)]) == 0
        report = json.loads((out / "report_0.json").read_text())

        # Re-create the cumulative test batches the protocol evaluated on.
        from fenec import load_feature_file

        train = load_feature_file(root / "train.fenc")
        test = load_feature_file(root / "test.fenc")
        stream = build_task_stream(train, test, load_split(root / "split.json"))

        model_path = str(root / "model.fenm")
        accuracies = []
        for t in range(stream.n_tasks):
            assert main(["fit", "--config", cfg, "--model", model_path, "--tasks", str(t)]) == 0
            eval_file = root / f"cumulative_{t}.fenc"
            write_feature_file(stream.tasks[t].test, eval_file)
            capsys.readouterr()
            assert main(["eval", "--model", model_path, "--features", str(eval_file)]) == 0
            accuracies.append(json.loads(capsys.readouterr().out)["accuracy"])
        assert accuracies == report["per_task_accuracy"]

    def test_fit_out_of_order_rejected(self, workspace):
        root, _ = workspace
        cfg = str(root / "config.json")
        assert main(["fit", "--config", cfg, "--model", str(root / "m.fenm"), "--tasks", "1"]) == 2

    def test_fit_with_mismatched_seed_rejected(self, workspace):
        root, _ = workspace
        cfg = str(root / "config.json")
        model = str(root / "m.fenm")
        assert main(["fit", "--config", cfg, "--model", model, "--tasks", "0"]) == 0
        assert main(["fit", "--config", cfg, "--model", model, "--tasks", "1", "--seed", "9"]) == 2

    def test_eval_truncated_model_exits_3(self, workspace):
        root, _ = workspace
        cfg = str(root / "config.json")
        model = root / "m.fenm"
        assert main(["fit", "--config", cfg, "--model", str(model)]) == 0
        model.write_bytes(model.read_bytes()[:-20])
        assert main(["eval", "--model", str(model), "--features", str(root / "test.fenc")]) == 3

    def test_eval_dimension_mismatch_exits_3(self, workspace, rng):
        root, _ = workspace
        cfg = str(root / "config.json")
        model = str(root / "m.fenm")
        assert main(["fit", "--config", cfg, "--model", model]) == 0
        from fenec import FeatureBatch

        wide = root / "wide.fenc"
        write_feature_file(FeatureBatch(rng.normal(size=(4, 7)) + 100, [0, 1, 2, 3]), wide)
        assert main(["eval", "--model", model, "--features", str(wide)]) == 3

    def test_inspect_prints_header(self, workspace, capsys):
        root, _ = workspace
        cfg = str(root / "config.json")
        model = str(root / "m.fenm")
        assert main(["fit", "--config", cfg, "--model", model, "--tasks", "0"]) == 0
        capsys.readouterr()
        assert main(["inspect", "--model", model]) == 0
        header = json.loads(capsys.readouterr().out)
        assert header["classes"] == [0, 1]
        assert header["tasks_fitted"] == 1


class TestLogMethodCli:
    def test_log_run_and_incremental_fit_agree(self, tmp_path, rng):
        centers = np.diag([50.0, 50.0, 50.0, 50.0])[:4] + 100.0
        train = make_blobs(centers, 50, 1.0, rng)
        test = make_blobs(centers, 20, 1.0, rng)
        write_feature_file(train, tmp_path / "train.fenc")
        write_feature_file(test, tmp_path / "test.fenc")
        (tmp_path / "split.json").write_text(json.dumps([[0, 1], [2, 3]]))
        config = {
            "method": "fenec_log",
            "train_features": "train.fenc",
            "test_features": "test.fenc",
            "splits": ["split.json"],
            "seeds": [1],
            "hyperparams": {
                "n_clusters": 2,
                "n_neighbors": 1,
                "gamma1": 1.0,
                "gamma2": 0.5,
                "learning_rate": 0.05,
            },
            "training": {"max_epochs": 40},
        }
        cfg = write_config(tmp_path, config)
        out = tmp_path / "out"
        assert main(["run", "--config", cfg, "--out", str(out)]) == 0
        report = json.loads((out / "report_1.json").read_text())
        assert min(report["per_task_accuracy"]) >= 0.95

        model = str(tmp_path / "m.fenm")
        assert main(["fit", "--config", cfg, "--model", model]) == 0
        from fenec import read_model_header

        header = read_model_header(model)
        assert header["head"]["frozen"] is True
