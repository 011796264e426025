import json

import numpy as np
import pytest

from oodcal.calibrate import ThresholdModel
from oodcal.cli import main
from oodcal.dataset import save_dataset
from oodcal.scores import DetectorModel
from oodcal.synthetic import make_ood_logits, make_shifted_logits


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    ds = make_shifted_logits(80, num_classes=5, seed=10, name="synth-id")
    save_dataset(ds, root / "id.csv", root / "id.json")
    for i, level in enumerate([4.0, 1.0, -2.0]):
        ood = make_ood_logits(120, num_classes=5, level=level, seed=20 + i, name=f"ood{i}")
        save_dataset(ood, root / f"ood{i}.csv", root / f"ood{i}.json")
    return root


def run(args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def fitted(workdir):
    for scheme in ("one", "multi"):
        code = run(
            [
                "fit",
                "--id", workdir / "id.csv",
                "--scheme", scheme,
                "--beta", "0.95",
                "--seed", "3",
                "--detector-out", workdir / "det.json",
                "--threshold-out", workdir / f"t{scheme}.json",
            ]
        )
        assert code == 0
    return workdir


class TestFit:
    def test_multi_has_k_taus(self, fitted):
        model = ThresholdModel.load(fitted / "tmulti.json")
        assert model.scheme == "multi" and model.num_classes == 5

    def test_detector_file_loads(self, fitted):
        assert DetectorModel.load(fitted / "det.json").kind == "max_logit"

    def test_missing_dataset_flag_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exit_info:
            run(["fit", "--detector-out", "x.json", "--threshold-out", "y.json"])
        assert exit_info.value.code == 2

    def test_bad_beta_exits_2(self, workdir, capsys):
        code = run(
            [
                "fit",
                "--id", workdir / "id.csv",
                "--beta", "1.5",
                "--detector-out", workdir / "d2.json",
                "--threshold-out", workdir / "t2.json",
            ]
        )
        assert code == 2
        assert "BetaOutOfRange" in capsys.readouterr().err

    def test_missing_file_exits_2(self, workdir, capsys):
        code = run(
            [
                "fit",
                "--id", workdir / "nope.csv",
                "--detector-out", workdir / "d3.json",
                "--threshold-out", workdir / "t3.json",
            ]
        )
        assert code == 2

    def test_fitted_knn_detector(self, workdir):
        code = run(
            [
                "fit",
                "--id", workdir / "id.csv",
                "--detector", "knn",
                "--k", "2",
                "--metric", "braycurtis",
                "--aggregation", "median",
                "--detector-out", workdir / "knn.json",
                "--threshold-out", workdir / "tknn.json",
            ]
        )
        assert code == 0
        assert DetectorModel.load(workdir / "knn.json").metric == "braycurtis"


class TestEval:
    def test_side_by_side_reports(self, fitted, capsys):
        code = run(
            [
                "eval",
                "--detector-model", fitted / "det.json",
                "--threshold-model", fitted / "tone.json",
                "--threshold-model", fitted / "tmulti.json",
                "--id-test", fitted / "id.csv",
                "--ood", fitted / "ood0.csv",
                "--ood", fitted / "ood1.csv",
            ]
        )
        assert code == 0
        reports = json.loads(capsys.readouterr().out)
        assert [r["scheme"] for r in reports] == ["one", "multi"]
        assert len(reports[0]["per_ood_set"]) == 2
        assert "mean_missed_detection" in reports[0]

    def test_no_ood_sets(self, fitted, capsys):
        code = run(
            [
                "eval",
                "--detector-model", fitted / "det.json",
                "--threshold-model", fitted / "tone.json",
                "--id-test", fitted / "id.csv",
            ]
        )
        assert code == 0
        report = json.loads(capsys.readouterr().out)[0]
        assert report["per_ood_set"] == []
        assert "mean_missed_detection" not in report

    def test_k_mismatch_exits_3(self, fitted, tmp_path, capsys):
        wrong = make_shifted_logits(30, num_classes=3, seed=1, name="wrong")
        save_dataset(wrong, tmp_path / "w.csv", tmp_path / "w.json")
        code = run(
            [
                "eval",
                "--detector-model", fitted / "det.json",
                "--threshold-model", fitted / "tmulti.json",
                "--id-test", tmp_path / "w.csv",
            ]
        )
        assert code == 3

    def test_csv_dir(self, fitted, tmp_path, capsys):
        code = run(
            [
                "eval",
                "--detector-model", fitted / "det.json",
                "--threshold-model", fitted / "tmulti.json",
                "--id-test", fitted / "id.csv",
                "--ood", fitted / "ood0.csv",
                "--csv-dir", tmp_path / "csvs",
            ]
        )
        assert code == 0
        assert (tmp_path / "csvs" / "tpr_multi.csv").exists()
        assert (tmp_path / "csvs" / "ood_rates_multi.csv").exists()

    def test_data_error_exits_3(self, fitted, tmp_path, capsys):
        (tmp_path / "bad.csv").write_text("id,label,c0,c1,c2,c3,c4\na,0,1,2,NaN,4,5\n")
        (tmp_path / "bad.json").write_text(
            json.dumps({"name": "bad", "kind": "id", "num_classes": 5, "column_kind": "logits"})
        )
        code = run(
            [
                "eval",
                "--detector-model", fitted / "det.json",
                "--threshold-model", fitted / "tone.json",
                "--id-test", tmp_path / "bad.csv",
            ]
        )
        assert code == 3
        assert "NonFiniteValue" in capsys.readouterr().err


class TestSimulateCli:
    def test_shift_rerun_is_byte_identical(self, workdir, tmp_path, capsys):
        outs = []
        for tag in ("a", "b"):
            code = run(
                [
                    "simulate", "shift",
                    "--id", workdir / "id.csv",
                    "--trials", "25",
                    "--seed", "7",
                    "--scheme", "one",
                    "--out-csv", tmp_path / f"{tag}.csv",
                    "--out-json", tmp_path / f"{tag}.json",
                ]
            )
            assert code == 0
            outs.append(
                ((tmp_path / f"{tag}.csv").read_bytes(), (tmp_path / f"{tag}.json").read_bytes())
            )
        assert outs[0] == outs[1]

    def test_oversample_unit_gamma_zero_variance(self, fitted, tmp_path, capsys):
        code = run(
            [
                "simulate", "oversample",
                "--id-test", fitted / "id.csv",
                "--detector-model", fitted / "det.json",
                "--threshold-model", fitted / "tmulti.json",
                "--trials", "10",
                "--gamma", "1", "1",
                "--seed", "4",
                "--out-csv", tmp_path / "o.csv",
                "--out-json", tmp_path / "o.json",
            ]
        )
        assert code == 0
        summary = json.loads((tmp_path / "o.json").read_text())
        assert all(row["std"] == 0.0 for row in summary["per_class_tpr"])

    def test_sweep_point_count(self, fitted, tmp_path, capsys):
        code = run(
            [
                "simulate", "sweep",
                "--detector-model", fitted / "det.json",
                "--threshold-one", fitted / "tone.json",
                "--threshold-multi", fitted / "tmulti.json",
                "--ood", fitted / "ood0.csv",
                "--ood", fitted / "ood1.csv",
                "--delta", "0.5",
                "--points", "50",
                "--out-csv", tmp_path / "s.csv",
                "--out-json", tmp_path / "s.json",
            ]
        )
        assert code == 0
        lines = (tmp_path / "s.csv").read_text().splitlines()
        assert len(lines) == 1 + 50 * 2  # 50 rows per OoD set


class TestAnalyzeCli:
    def test_distances_row_per_set(self, workdir, tmp_path, capsys):
        code = run(
            [
                "analyze", "distances",
                "--id-test", workdir / "id.csv",
                "--ood", workdir / "ood0.csv",
                "--ood", workdir / "ood1.csv",
                "--ood", workdir / "ood2.csv",
                "--out-csv", tmp_path / "d.csv",
            ]
        )
        assert code == 0
        lines = (tmp_path / "d.csv").read_text().splitlines()
        assert lines[0] == "ood_set,wasserstein,energy"
        assert len(lines) == 4

    def test_correlate_monotone(self, tmp_path, capsys):
        (tmp_path / "rates.csv").write_text(
            "ood_set,missed_detection_rate\na,0.9\nb,0.5\nc,0.2\n"
        )
        (tmp_path / "dist.csv").write_text(
            "ood_set,wasserstein,energy\na,1.0,2.0\nb,2.0,4.0\nc,3.0,6.0\n"
        )
        code = run(
            [
                "analyze", "correlate",
                "--rates-csv", tmp_path / "rates.csv",
                "--distances-csv", tmp_path / "dist.csv",
                "--out-csv", tmp_path / "corr.csv",
            ]
        )
        assert code == 0
        result = json.loads(capsys.readouterr().out)
        assert result["wasserstein_r"] == pytest.approx(-0.9966158955401238)
        header = (tmp_path / "corr.csv").read_text().splitlines()[0]
        assert header == "detector,scheme,wasserstein_r,energy_r"

    def test_gridsearch_singleton(self, workdir, tmp_path, capsys):
        (tmp_path / "grid.json").write_text(
            json.dumps({"family": "energy", "temperature": [1.0]})
        )
        code = run(
            [
                "analyze", "gridsearch",
                "--grid", tmp_path / "grid.json",
                "--fit", workdir / "id.csv",
                "--valid-id", workdir / "id.csv",
                "--valid-ood", workdir / "ood0.csv",
                "--out-csv", tmp_path / "g.csv",
            ]
        )
        assert code == 0
        lines = (tmp_path / "g.csv").read_text().splitlines()
        assert len(lines) == 2
        best = json.loads(capsys.readouterr().out)
        assert best["temperature"] == 1.0


class TestConfig:
    def test_config_defaults_and_override(self, workdir, tmp_path, capsys):
        config = {"beta": 0.9, "scheme": "multi", "seed": 5}
        (tmp_path / "cfg.json").write_text(json.dumps(config))
        code = run(
            [
                "fit",
                "--config", tmp_path / "cfg.json",
                "--id", workdir / "id.csv",
                "--beta", "0.8",  # explicit flag wins over config
                "--detector-out", tmp_path / "d.json",
                "--threshold-out", tmp_path / "t.json",
            ]
        )
        assert code == 0
        model = ThresholdModel.load(tmp_path / "t.json")
        assert model.scheme == "multi"  # from config
        assert model.beta == 0.8  # overridden
