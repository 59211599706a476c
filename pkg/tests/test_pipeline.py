import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from oeebench.errors import ConfigError, ModelError
from oeebench.oee import FEATURE_NAMES, Dataset, write_csv
from oeebench.pipeline import (
    MODEL_NAMES, ExperimentConfig, compare, derive_seed, load_config, parse_config, prepare,
    run_config,
)
from oeebench.prep import kfold
from oeebench.stats import mae
from oeebench.store import load_model, save_model
from oeebench.svr import svr_fit, svr_predict
from oeebench.synth import generate

SMALL = """
[experiment]
seed = 7
cv_k = 3
plot_items = 10

[generator]
n_rows = 150

[ga]
population = 4
generations = 1
folds = 2

[rf]
n_trees = 5

[xgb]
rounds = 8

[dl]
hidden1 = 8
hidden2 = 4
epochs = 20
"""


def _small(**changes):
    return replace(parse_config(SMALL), **changes)


def test_config_text_roundtrip():
    for cfg in (ExperimentConfig(), _small()):
        back = parse_config(cfg.to_text())
        assert back.to_text() == cfg.to_text()
        assert back.digest() == cfg.digest()


def test_parse_values_and_defaults():
    cfg = _small()
    assert cfg.seed == 7 and cfg.cv_k == 3 and cfg.generator.n_rows == 150
    assert cfg.rf.n_trees == 5 and cfg.gbt.rounds == 8 and cfg.mlp_arch.sizes == (7, 8, 4, 1)
    assert cfg.split_ratio == 0.85 and cfg.svr.C == 1.0 and cfg.svr.kernel.gamma == 0.15


def test_parse_rejects_unknown_names():
    with pytest.raises(ConfigError):
        parse_config("[experiment]\nseeed = 3\n")
    with pytest.raises(ConfigError):
        parse_config("[extra]\nx = 1\n")
    with pytest.raises(ConfigError):
        parse_config("[experiment]\ncv_k = ten\n")
    with pytest.raises(ConfigError):
        parse_config("[experiment]\ncv_k = 1\n")


def test_load_config_missing_names_path(tmp_path):
    missing = tmp_path / "nope.ini"
    with pytest.raises(ConfigError, match="nope.ini"):
        load_config(missing)


def test_load_config_resolves_data_relative(tmp_path):
    (tmp_path / "c.ini").write_text("[experiment]\ndata = shifts.csv\n", encoding="utf-8")
    assert Path(load_config(tmp_path / "c.ini").data_path) == tmp_path / "shifts.csv"


def test_seed_override_reaches_generator():
    cfg = _small().with_seed(99)
    assert cfg.seed == 99 and cfg.generator.seed == 99


def test_derive_seed_stable_and_distinct():
    assert derive_seed(42, "split") == derive_seed(42, "split")
    assert len({derive_seed(42, n) for n in ("split", "folds", *MODEL_NAMES)}) == 10
    assert 0 <= derive_seed(42, "split") < 2**63


def test_all_configs_share_split_and_folds():
    cfg = _small()
    a = prepare(generate(cfg.generator), cfg)
    b = prepare(generate(cfg.generator), cfg)
    assert np.array_equal(a.split.test, b.split.test)
    assert all(np.array_equal(x, y) for x, y in zip(a.folds.folds, b.folds.folds))
    assert sorted(np.concatenate(a.folds.folds).tolist()) == sorted(a.split.train.tolist())


def test_rf_constant_target_is_exact(rng):
    ds = Dataset(FEATURE_NAMES, rng.normal(size=(60, 7)), np.full(60, 63.5))
    cfg = _small()
    run = run_config("RF", prepare(ds, cfg), cfg)
    assert run.mae < 1e-9 and run.cv_mae is None


def test_svrcv_metric_is_hand_fold_average(rng):
    ds = Dataset(FEATURE_NAMES, rng.normal(size=(40, 7)), 60 + 8 * rng.normal(size=40))
    cfg = _small(remove_outliers=False)
    data = prepare(ds, cfg)
    run = run_config("SVRCV", data, cfg)
    folds = kfold(data.split.train, 3, derive_seed(cfg.seed, "folds"))
    per_fold = []
    for i, fold in enumerate(folds.folds):
        train = folds.complement(i)
        m = svr_fit(data.X_all[train], data.y_all[train], cfg.svr)
        per_fold.append(mae(data.y_all[fold], svr_predict(m, data.X_all[fold])))
    assert run.cv_mae == pytest.approx(np.mean(per_fold), rel=1e-12)
    # test metrics come from the full-train refit
    refit = svr_fit(data.X_all[data.split.train], data.y_all[data.split.train], cfg.svr)
    assert run.mae == pytest.approx(mae(data.y_test, svr_predict(refit, data.X_test)), rel=1e-12)


def test_unknown_config_name():
    cfg = _small()
    with pytest.raises(ConfigError):
        run_config("LASSO", prepare(generate(cfg.generator), cfg), cfg)


def test_fitted_model_roundtrip(tmp_path):
    cfg = _small()
    data = prepare(generate(cfg.generator), cfg)
    for name in ("SVR", "RF", "XGB", "DL"):
        run = run_config(name, data, cfg)
        save_model(run.fitted, tmp_path / f"{name}.json")
        back = load_model(tmp_path / f"{name}.json")
        rows = data.dataset.rows[data.split.test]
        assert np.allclose(back.predict(rows), run.test_pred, rtol=0, atol=1e-9)


def test_load_model_errors(tmp_path):
    with pytest.raises(ModelError):
        load_model(tmp_path / "absent.json")
    (tmp_path / "bad.json").write_text("{not json", encoding="utf-8")
    with pytest.raises(ModelError):
        load_model(tmp_path / "bad.json")
    (tmp_path / "other.json").write_text('{"format": "x"}', encoding="utf-8")
    with pytest.raises(ModelError):
        load_model(tmp_path / "other.json")


def _strip_timing(report: dict) -> dict:
    for row in report["models"].values():
        row.pop("wall_time_s")
    return report


def test_small_compare_outputs_and_determinism(tmp_path):
    cfg = _small()
    r1 = compare(cfg, tmp_path / "a")
    compare(cfg, tmp_path / "b")
    j1 = json.loads((tmp_path / "a" / "report.json").read_text())
    j2 = json.loads((tmp_path / "b" / "report.json").read_text())
    assert _strip_timing(j1) == _strip_timing(j2)
    assert sorted(j1["models"]) == sorted(MODEL_NAMES)
    assert j1["partial"] is False and j1["error"] is None
    assert set(j1["stats"]) >= {"anova", "tukey", "dispersion", "letters"}
    assert j1["provenance"]["seed"] == 7 and j1["provenance"]["cv_k"] == 3
    csv = (tmp_path / "a" / "report.csv").read_text().splitlines()
    assert csv[0].startswith("model,mae,mape,cv_mae") and len(csv) == 9
    assert [line.split(",")[0] for line in csv[1:]] == list(MODEL_NAMES)
    for name in MODEL_NAMES:
        a = (tmp_path / "a" / f"predictions_{name}.svg").read_bytes()
        assert a == (tmp_path / "b" / f"predictions_{name}.svg").read_bytes()
    for extra in ("predictions.csv", "errors.csv", "loss_curve_DL.csv", "ga_history_SVRGA.csv",
                  "error_boxplots.svg", "tukey_ci.svg", "oee_histogram.svg"):
        assert (tmp_path / "a" / extra).exists()
    assert all(r.mae >= 0 and r.mape >= 0 for r in r1.runs)
    assert {r.name for r in r1.runs if r.cv_mae is not None} == {"SVRCV", "SVRGA", "RFCV", "XGBCV"}


def test_compare_reads_csv_data(tmp_path):
    cfg = _small()
    write_csv(generate(cfg.generator), tmp_path / "d.csv")
    report = compare(replace(cfg, data_path=str(tmp_path / "d.csv")), tmp_path / "out")
    assert len(report.runs) == 8


def test_partial_report_on_failure(tmp_path):
    cfg = _small()
    cfg = replace(cfg, mlp=replace(cfg.mlp, learning_rate=1e308))
    with pytest.raises(ModelError, match="DL"):
        compare(cfg, tmp_path)
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["partial"] is True and "DL" in report["error"]
    assert sorted(report["models"]) == sorted(MODEL_NAMES[:-1])


def test_digest_ignores_data_location():
    a = replace(_small(), data_path="/one/place/d.csv")
    b = replace(_small(), data_path="/another/d.csv")
    assert a.digest() == b.digest() != replace(_small(), cv_k=4).digest()


def test_inline_comments_allowed():
    cfg = parse_config("[experiment]  # main\ncv_k = 4   # folds\n[dl]\nbatch_size =   ; full batch\n")
    assert cfg.cv_k == 4 and cfg.mlp.batch_size is None
