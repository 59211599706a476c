import json
import subprocess
import sys

import pytest

from oeebench.cli import main
from test_pipeline import SMALL


@pytest.fixture
def workspace(tmp_path):
    (tmp_path / "small.ini").write_text(SMALL, encoding="utf-8")
    assert main(["generate", "--seed", "7", "--rows", "150", "--out", str(tmp_path / "raw.csv")]) == 0
    return tmp_path


def test_generate_and_prepare(workspace):
    split = workspace / "split.json"
    code = main(["prepare", "--in", str(workspace / "raw.csv"), "--out", str(workspace / "clean.csv"),
                 "--k", "3", "--split-out", str(split)])
    assert code == 0
    payload = json.loads(split.read_text())
    n_clean = len((workspace / "clean.csv").read_text().splitlines()) - 1
    assert n_clean + len(payload["removed"]) == 150
    assert len(payload["train"]) + len(payload["test"]) == n_clean and len(payload["folds"]) == 3
    assert main(["prepare", "--in", str(workspace / "raw.csv"), "--out", str(workspace / "all.csv"),
                 "--no-outlier-removal"]) == 0
    assert len((workspace / "all.csv").read_text().splitlines()) == 151


def test_train_then_predict_row_count(workspace):
    model = workspace / "rf.json"
    assert main(["train", "--model", "RF", "--config", str(workspace / "small.ini"),
                 "--data", str(workspace / "raw.csv"), "--out", str(model)]) == 0
    out = workspace / "pred.csv"
    assert main(["predict", "--model", str(model), "--in", str(workspace / "raw.csv"),
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "row,oee_pred" and len(lines) == 151


def test_tune_ga_history(workspace):
    hist = workspace / "hist.csv"
    assert main(["tune-ga", "--config", str(workspace / "small.ini"), "--data", str(workspace / "raw.csv"),
                 "--history-out", str(hist)]) == 0
    assert hist.read_text().splitlines()[0] == "generation,best_fitness,best_c,best_gamma"


def test_compare_and_plots(workspace):
    out = workspace / "cmp"
    assert main(["compare", "--config", str(workspace / "small.ini"), "--out-dir", str(out)]) == 0
    assert len((out / "report.csv").read_text().splitlines()) == 9
    cases = [
        ("histogram", workspace / "raw.csv"),
        ("predictions", out / "predictions.csv"),
        ("loss", out / "loss_curve_DL.csv"),
        ("boxplot", out / "errors.csv"),
        ("tukey", out / "errors.csv"),
    ]
    for kind, src in cases:
        target = workspace / f"{kind}.svg"
        assert main(["plot", "--kind", kind, "--in", str(src), "--out", str(target), "--items", "10"]) == 0
        assert target.read_text().startswith("<?xml")


def test_missing_config_exit_1(workspace, capsys):
    code = main(["compare", "--config", str(workspace / "absent.ini"), "--out-dir", str(workspace / "o")])
    assert code == 1
    assert "absent.ini" in capsys.readouterr().err


def test_usage_errors_exit_1(capsys):
    assert main(["frobnicate"]) == 1
    assert main(["generate", "--out", "x.csv", "--bogus"]) == 1
    assert main(["train", "--model", "LASSO", "--config", "c", "--data", "d", "--out", "o"]) == 1
    assert "usage" in capsys.readouterr().err


def test_data_errors_exit_2(workspace):
    assert main(["prepare", "--in", str(workspace / "absent.csv"), "--out", str(workspace / "o.csv")]) == 2
    (workspace / "bad.csv").write_text("a,b\n1,2\n", encoding="utf-8")
    assert main(["prepare", "--in", str(workspace / "bad.csv"), "--out", str(workspace / "o.csv")]) == 2


def test_model_errors_exit_3(workspace):
    assert main(["predict", "--model", str(workspace / "absent.json"), "--in", str(workspace / "raw.csv"),
                 "--out", str(workspace / "p.csv")]) == 3
    cfg = workspace / "diverge.ini"
    cfg.write_text(SMALL + "learning_rate = 1e308\n", encoding="utf-8")
    assert main(["compare", "--config", str(cfg), "--out-dir", str(workspace / "o")]) == 3


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "oeebench.cli", "generate", "--rows", "5",
                           "--out", str(tmp_path / "x.csv")], capture_output=True, text=True)
    assert proc.returncode == 0
    assert len((tmp_path / "x.csv").read_text().splitlines()) == 6
