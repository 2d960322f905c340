import json
import struct

import numpy as np
import pytest

from selftrain.bench import (ConfigError, build_dataset, cluster_timing, load_config,
                             preset_config, read_report_csv, report_deterministic_view,
                             run, sweep_labeled_budget, validate_config)
from selftrain.cli import main
from selftrain.training import read_trajectory_csv


def tiny_doc(out_dir, seeds=(1, 2, 3), methods=("kmeans",)):
    return {
        "dataset": {"source": "blobs", "class_count": 3, "per_class": 40,
                    "dims": 2, "spread": 0.5},
        "split": {"labels_per_class": 3, "test_fraction": 0.25},
        "backbone": {"kind": "random_feature_ridge", "hidden_width": 32},
        "selftrain": {"rounds": 3,
                      "schedule": {"initial_fraction": 0.3, "rounds": 2}},
        "clustering": {"methods": list(methods)},
        "seeds": list(seeds),
        "output_dir": str(out_dir),
    }


class TestValidation:
    def test_missing_field_names_path(self):
        with pytest.raises(ConfigError) as err:
            validate_config({"dataset": {"source": "blobs"}})
        assert "$.dataset.class_count" in str(err.value)

    def test_unknown_cluster_method_rejected_at_parse_time(self, tmp_path):
        doc = tiny_doc(tmp_path, methods=("kmeans", "spectral"))
        with pytest.raises(ConfigError) as err:
            validate_config(doc)
        assert "$.clustering.methods[1]" in str(err.value)

    def test_missing_file_rejected(self, tmp_path):
        doc = tiny_doc(tmp_path)
        doc["dataset"] = {"source": "csv", "path": str(tmp_path / "absent.csv")}
        with pytest.raises(ConfigError) as err:
            validate_config(doc)
        assert "$.dataset.path" in str(err.value)

    def test_bad_fraction_rejected(self, tmp_path):
        doc = tiny_doc(tmp_path)
        doc["split"]["test_fraction"] = 1.5
        with pytest.raises(ConfigError, match="test_fraction"):
            validate_config(doc)

    def test_rounds_must_cover_schedule(self, tmp_path):
        doc = tiny_doc(tmp_path)
        doc["selftrain"]["rounds"] = 2
        with pytest.raises(ConfigError, match="rounds"):
            validate_config(doc)

    def test_empty_seeds_rejected(self, tmp_path):
        doc = tiny_doc(tmp_path)
        doc["seeds"] = []
        with pytest.raises(ConfigError, match="seeds"):
            validate_config(doc)

    def test_json_error_carries_line(self, tmp_path):
        p = tmp_path / "broken.json"
        p.write_text('{"dataset": }')
        with pytest.raises(ConfigError, match="line 1"):
            load_config(str(p))


class TestRun:
    def test_file_counts_and_exit_code(self, tmp_path):
        cfg = validate_config(tiny_doc(tmp_path / "out"))
        code, doc = run(cfg)
        assert code == 0
        traj_csvs = sorted((tmp_path / "out" / "trajectories").glob("*.csv"))
        assert len(traj_csvs) == 6  # 3 ST + 3 IST
        assert (tmp_path / "out" / "report.csv").exists()
        assert (tmp_path / "out" / "report.json").exists()
        assert (tmp_path / "out" / "plotdata" / "accuracy_vs_round.csv").exists()
        assert (tmp_path / "out" / "plotdata" / "cluster_time.csv").exists()
        assert len(doc["cells"]) == 6

    def test_rerun_is_deterministic_apart_from_wall_clock(self, tmp_path):
        cfg_a = validate_config(tiny_doc(tmp_path / "a"))
        cfg_b = validate_config(tiny_doc(tmp_path / "b"))
        _, doc_a = run(cfg_a)
        _, doc_b = run(cfg_b)
        doc_a["config"]["output_dir"] = doc_b["config"]["output_dir"] = ""
        assert report_deterministic_view(doc_a) == report_deterministic_view(doc_b)

    def test_report_round_trips_and_aggregates_recompute(self, tmp_path):
        cfg = validate_config(tiny_doc(tmp_path / "out"))
        _, doc = run(cfg)
        report = read_report_csv(str(tmp_path / "out" / "report.csv"))
        assert [vars(c) for c in report.cells] == doc["cells"]
        assert report.aggregates() == doc["aggregates"]
        for method, agg in doc["aggregates"].items():
            accs = [c["final_accuracy"] for c in doc["cells"]
                    if c["method"] == method and c["status"] == "ok"]
            assert agg["final_accuracy"]["median"] == float(np.median(accs))

    def test_trajectory_files_re_readable(self, tmp_path):
        cfg = validate_config(tiny_doc(tmp_path / "out", seeds=(1,)))
        run(cfg)
        path = tmp_path / "out" / "trajectories" / "st_seed1.csv"
        traj = read_trajectory_csv(str(path))
        assert traj.rounds_completed == 3
        summary = json.loads(
            (tmp_path / "out" / "trajectories" / "st_seed1.summary.json").read_text())
        assert summary["final_accuracy"] == traj.accuracy[-1]

    def test_worker_pool_matches_sequential(self, tmp_path):
        cfg_seq = validate_config(tiny_doc(tmp_path / "seq", seeds=(1, 2)))
        cfg_par = validate_config(tiny_doc(tmp_path / "par", seeds=(1, 2)))
        _, doc_seq = run(cfg_seq, workers=1)
        _, doc_par = run(cfg_par, workers=2)
        doc_seq["config"]["output_dir"] = doc_par["config"]["output_dir"] = ""
        assert report_deterministic_view(doc_seq) == report_deterministic_view(doc_par)

    def test_failed_cell_marked_and_partial_exit(self, tmp_path):
        doc = tiny_doc(tmp_path / "out", seeds=(1,))
        doc["backbone"] = {"kind": "softmax_sgd", "learning_rate": 1e308, "epochs": 2}
        cfg = validate_config(doc)
        code, report = run(cfg)
        assert code == 3
        assert all(c["status"] == "failed" for c in report["cells"])
        assert all("learning_rate" in c["error"] for c in report["cells"])


class TestSweep:
    def test_sub_reports_and_merged_rows(self, tmp_path):
        cfg = validate_config(tiny_doc(tmp_path / "out", seeds=(1, 2)))
        code, _ = sweep_labeled_budget(cfg, [1, 3])
        assert code == 0
        merged = (tmp_path / "out" / "sweep_merged.csv").read_text().strip().splitlines()
        # header + budgets x methods(st, ist) x seeds
        assert len(merged) == 1 + 2 * 2 * 2
        assert (tmp_path / "out" / "budget_1" / "report.csv").exists()
        assert (tmp_path / "out" / "budget_3" / "report.csv").exists()

    def test_single_budget_matches_plain_run(self, tmp_path):
        cfg_sweep = validate_config(tiny_doc(tmp_path / "sweep", seeds=(1,)))
        sweep_labeled_budget(cfg_sweep, [3])
        direct_doc = tiny_doc(tmp_path / "direct", seeds=(1,))
        direct_doc["split"]["labels_per_class"] = 3
        _, direct = run(validate_config(direct_doc))
        sub = json.loads((tmp_path / "sweep" / "budget_3" / "report.json").read_text())
        sub["config"]["output_dir"] = direct["config"]["output_dir"] = ""
        assert report_deterministic_view(sub) == report_deterministic_view(direct)

    def test_infeasible_budget_named(self, tmp_path):
        cfg = validate_config(tiny_doc(tmp_path / "out", seeds=(1,)))
        with pytest.raises(ConfigError, match="budget 1000"):
            sweep_labeled_budget(cfg, [1000])

    def test_round0_accuracy_monotone_in_budget(self, tmp_path):
        doc = tiny_doc(tmp_path / "out", seeds=(1, 2, 3, 4, 5))
        doc["dataset"]["per_class"] = 60
        cfg = validate_config(doc)
        sweep_labeled_budget(cfg, [1, 4, 10])
        medians = []
        for budget in (1, 4, 10):
            accs = []
            for seed in (1, 2, 3, 4, 5):
                path = tmp_path / "out" / f"budget_{budget}" / "trajectories" / \
                    f"st_seed{seed}.csv"
                accs.append(read_trajectory_csv(str(path)).accuracy[0])
            medians.append(float(np.median(accs)))
        assert medians[0] <= medians[1] <= medians[2]


class TestClusterTiming:
    def test_one_row_per_method(self, tmp_path):
        cfg = validate_config(tiny_doc(tmp_path / "out", seeds=(1, 2),
                                       methods=("kmeans", "minibatch_kmeans")))
        code, table = cluster_timing(cfg)
        assert code == 0
        assert set(table) == {"kmeans", "minibatch_kmeans"}
        for row in table.values():
            assert len(row["fit_seconds"]) == 2
            assert row["median_seconds"] is not None
        lines = (tmp_path / "out" / "cluster_time.csv").read_text().splitlines()
        assert len(lines) == 3

    def test_method_failure_marks_row(self, tmp_path):
        doc = tiny_doc(tmp_path / "out", seeds=(1,), methods=("kmeans", "birch"))
        doc["clustering"]["birch"] = {"threshold": 1e9, "global_k": 3}
        cfg = validate_config(doc)
        code, table = cluster_timing(cfg)
        assert code == 3
        assert table["kmeans"]["error"] is None
        assert table["birch"]["error"] is not None


class TestPresets:
    def test_blobs_small_validates(self):
        cfg = validate_config(preset_config("blobs-small"))
        assert cfg.dataset["per_class"] == 600
        assert cfg.split["labels_per_class"] == 4

    def test_blobs_noisy_keeps_clean_geometry(self):
        doc = preset_config("blobs-noisy")
        assert doc["dataset"]["spread"] == 1.2
        assert doc["dataset"]["min_separation"] == 3.0

    def test_mnist_preset_needs_dir(self):
        with pytest.raises(ConfigError, match="mnist-dir"):
            preset_config("mnist-100")

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="unknown preset"):
            preset_config("cifar")

    def test_timing_preset_scale(self):
        doc = preset_config("blobs-timing")
        assert doc["dataset"]["class_count"] * doc["dataset"]["per_class"] == 20000
        assert doc["dataset"]["dims"] == 50

    def test_mnist_preset_pipeline_on_synthetic_idx(self, tmp_path):
        # digit-free stand-in: 10 classes of 6x6 images, one bright pixel block
        # per class, written in the same binary layout the preset expects
        rng = np.random.default_rng(0)
        per_class = 40
        images = np.zeros((10 * per_class, 6, 6), dtype=np.uint8)
        labels = np.repeat(np.arange(10, dtype=np.uint8), per_class)
        for i, lab in enumerate(labels):
            images[i] = rng.integers(0, 30, size=(6, 6)).astype(np.uint8)
            images[i, lab // 4, lab % 4] = 220
        order = rng.permutation(len(labels))
        images, labels = images[order], labels[order]
        with open(tmp_path / "train-images-idx3-ubyte", "wb") as fh:
            fh.write(struct.pack(">IIII", 0x00000803, len(labels), 6, 6))
            fh.write(images.tobytes())
        with open(tmp_path / "train-labels-idx1-ubyte", "wb") as fh:
            fh.write(struct.pack(">II", 0x00000801, len(labels)))
            fh.write(labels.tobytes())

        doc = preset_config("mnist-100", out_dir=str(tmp_path / "out"),
                            mnist_dir=str(tmp_path))
        doc["seeds"] = [1]
        doc["selftrain"]["rounds"] = 3
        doc["selftrain"]["schedule"] = {"initial_fraction": 0.3, "rounds": 2}
        doc["backbone"]["epochs"] = 40
        code, report = run(validate_config(doc))
        assert code == 0
        assert {c["method"] for c in report["cells"]} == {"st", "ist-kmeans"}
        for cell in report["cells"]:
            assert cell["final_accuracy"] >= 0.5


class TestBuildDataset:
    def test_blobs_seeded(self):
        spec = {"source": "blobs", "class_count": 2, "per_class": 5, "dims": 2,
                "spread": 1.0}
        a = build_dataset(spec, 1)
        b = build_dataset(spec, 1)
        assert np.array_equal(a.features, b.features)

    def test_max_rows_truncates(self):
        spec = {"source": "blobs", "class_count": 2, "per_class": 50, "dims": 2,
                "spread": 1.0, "max_rows": 30}
        assert build_dataset(spec, 0).n == 30


class TestCli:
    def write_config(self, tmp_path, doc=None):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(doc or tiny_doc(tmp_path / "out", seeds=(1,))))
        return str(path)

    def test_validate_ok(self, tmp_path, capsys):
        assert main(["validate", self.write_config(tmp_path)]) == 0
        assert "OK" in capsys.readouterr().out

    def test_validate_bad_config(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps({"dataset": {"source": "nope"}}))
        assert main(["validate", str(p)]) == 2
        assert "config error" in capsys.readouterr().err

    def test_missing_config_and_preset(self, capsys):
        assert main(["run"]) == 2

    def test_run_writes_report(self, tmp_path, capsys):
        assert main(["run", self.write_config(tmp_path)]) == 0
        assert (tmp_path / "out" / "report.json").exists()

    def test_seed_override_changes_seed_set(self, tmp_path):
        assert main(["run", self.write_config(tmp_path),
                     "--seed-override", "7,8"]) == 0
        doc = json.loads((tmp_path / "out" / "report.json").read_text())
        assert sorted({c["seed"] for c in doc["cells"]}) == [7, 8]

    def test_out_flag_overrides_directory(self, tmp_path):
        assert main(["run", self.write_config(tmp_path),
                     "--out", str(tmp_path / "elsewhere")]) == 0
        assert (tmp_path / "elsewhere" / "report.json").exists()

    def test_sweep_cli(self, tmp_path):
        assert main(["sweep", "--budgets", "1,3",
                     self.write_config(tmp_path)]) == 0
        assert (tmp_path / "out" / "sweep_merged.csv").exists()

    def test_sweep_bad_budgets(self, tmp_path, capsys):
        assert main(["sweep", "--budgets", "a,b",
                     self.write_config(tmp_path)]) == 2

    def test_cluster_time_cli(self, tmp_path, capsys):
        assert main(["cluster-time", self.write_config(tmp_path)]) == 0
        assert (tmp_path / "out" / "cluster_time.csv").exists()
        assert "kmeans" in capsys.readouterr().out
