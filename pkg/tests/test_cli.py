import csv
import json

import numpy as np
import pytest

from modelmarket.cli import main


def write_config(tmp_path, name="config.json", **overrides):
    doc = {
        "schema_version": 1,
        "dataset": {"kind": "synthetic", "classes": 4, "features": 8,
                    "samples": 400, "separation": 4.0},
        "partition": {"strategy": "noniid_lds", "beta": 0.5},
        "m": 6,
        "split": [0.8, 0.1, 0.1],
        "train": {"arch": "softmax", "epochs": 6, "batch_size": 16,
                  "lr_init": 0.1, "lr_decay": 0.1, "lr_decay_every": 40},
        "selection": {"K": 3, "clustering": "auto"},
        "methods": ["dedes", "cv", "ds", "rs", "as", "lds",
                    "fedavg", "meanavg", "oracle"],
        "seeds": [0],
        "output_dir": str(tmp_path / "runs"),
        "sweep_Ks": [1, 3, 5],
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(doc.get(key), dict):
            doc[key].update(value)
        else:
            doc[key] = value
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def read_rows(report_csv):
    with open(report_csv) as handle:
        return list(csv.DictReader(handle))


class TestAllPipeline:
    def test_report_covers_every_method(self, tmp_path):
        cfg = write_config(tmp_path, m=10, selection={"K": 4},
                           dataset={"kind": "synthetic", "classes": 4,
                                    "features": 8, "samples": 500,
                                    "separation": 4.0})
        assert main(["all", "--config", str(cfg)]) == 0
        rows = read_rows(tmp_path / "runs" / "report.csv")
        methods = {row["method"] for row in rows}
        assert methods == {"dedes", "cv", "ds", "rs", "as", "lds",
                           "fedavg", "meanavg", "oracle"}
        assert all(row["seed"] == "0" for row in rows)

    def test_rank_columns_filled_for_teams(self, tmp_path):
        cfg = write_config(tmp_path)
        assert main(["all", "--config", str(cfg)]) == 0
        rows = {row["method"]: row for row in read_rows(tmp_path / "runs" / "report.csv")}
        assert rows["dedes"]["rank"] != ""
        assert rows["dedes"]["total_teams"] == str(2 ** 6 - 1)
        assert rows["fedavg"]["rank"] == ""

    def test_bit_identical_reports_across_runs(self, tmp_path):
        cfg_a = write_config(tmp_path, name="a.json",
                             output_dir=str(tmp_path / "run_a"))
        cfg_b = write_config(tmp_path, name="b.json",
                             output_dir=str(tmp_path / "run_b"))
        assert main(["all", "--config", str(cfg_a)]) == 0
        assert main(["all", "--config", str(cfg_b)]) == 0
        for name in ("report.csv", "report.json"):
            a = (tmp_path / "run_a" / name).read_bytes()
            b = (tmp_path / "run_b" / name).read_bytes()
            assert a == b

    def test_artifacts_exist_per_seed(self, tmp_path):
        cfg = write_config(tmp_path, seeds=[3])
        assert main(["all", "--config", str(cfg)]) == 0
        seed_dir = tmp_path / "runs" / "seed_3"
        for name in ("dataset.csv", "plan.json", "teams.json",
                     "evaluation.json", "inspection.json", "sweep.json",
                     "selection_debug.json"):
            assert (seed_dir / name).exists()
        assert (seed_dir / "store" / "records").is_dir()


class TestStageComposition:
    def test_partial_pipeline_matches_all(self, tmp_path):
        cfg_all = write_config(tmp_path, name="all.json",
                               output_dir=str(tmp_path / "chained"))
        assert main(["all", "--config", str(cfg_all)]) == 0

        cfg_steps = write_config(tmp_path, name="steps.json",
                                 output_dir=str(tmp_path / "stepwise"))
        for stage in ("synth", "partition", "train", "select",
                      "evaluate", "inspect", "sweep", "report"):
            assert main([stage, "--config", str(cfg_steps)]) == 0

        for name in ("teams.json", "evaluation.json", "inspection.json",
                     "sweep.json"):
            chained = (tmp_path / "chained" / "seed_0" / name).read_bytes()
            stepwise = (tmp_path / "stepwise" / "seed_0" / name).read_bytes()
            assert chained == stepwise
        assert ((tmp_path / "chained" / "report.csv").read_bytes()
                == (tmp_path / "stepwise" / "report.csv").read_bytes())

    def test_select_without_train_fails_cleanly(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        assert main(["select", "--config", str(cfg)]) == 1
        assert "error" in capsys.readouterr().err


class TestGuards:
    def test_inspect_over_cap_exits_one(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        for stage in ("synth", "partition", "train", "select"):
            assert main([stage, "--config", str(cfg)]) == 0
        assert main(["inspect", "--config", str(cfg), "--m-cap", "5"]) == 1
        assert "teams" in capsys.readouterr().err

    def test_bad_config_exits_two_with_field_path(self, tmp_path, capsys):
        cfg = write_config(tmp_path, m="ten")
        assert main(["all", "--config", str(cfg)]) == 2
        assert "m:" in capsys.readouterr().err

    def test_k_exceeding_m_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path, selection={"K": 50})
        assert main(["all", "--config", str(cfg)]) == 2
        assert "selection.K" in capsys.readouterr().err

    def test_unknown_method_names_index(self, tmp_path, capsys):
        cfg = write_config(tmp_path, methods=["dedes", "best"])
        assert main(["all", "--config", str(cfg)]) == 2
        assert "methods[1]" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["all", "--config", str(tmp_path / "none.json")]) == 2


class TestCsvIngestion:
    def test_csv_dataset_with_header_flag(self, tmp_path):
        rng = np.random.default_rng(0)
        lines = ["f0,f1,label"]
        for _ in range(120):
            klass = int(rng.integers(0, 2))
            x = rng.normal(loc=3.0 * klass, scale=0.5, size=2)
            lines.append(f"{x[0]},{x[1]},{klass}")
        data_path = tmp_path / "data.csv"
        data_path.write_text("\n".join(lines) + "\n")

        cfg = write_config(
            tmp_path,
            dataset={"kind": "csv", "path": str(data_path)},
            partition={"strategy": "homo"},
            m=4,
            selection={"K": 2, "clustering": "kmeans"},
            methods=["dedes", "cv", "as"],
            sweep_Ks=[1, 2],
        )
        assert main(["all", "--config", str(cfg), "--header"]) == 0
        rows = read_rows(tmp_path / "runs" / "report.csv")
        assert {row["method"] for row in rows} == {"dedes", "cv", "as"}
        assert rows[0]["dataset"] == "data"

    def test_seed_override_runs_single_seed(self, tmp_path):
        cfg = write_config(tmp_path, seeds=[0, 1])
        assert main(["all", "--config", str(cfg), "--seed", "7"]) == 0
        assert (tmp_path / "runs" / "seed_7").is_dir()
        assert not (tmp_path / "runs" / "seed_0").exists()
