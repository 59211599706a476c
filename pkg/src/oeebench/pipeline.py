"""Experiment protocol: prepare data, run the eight model configurations, compare them."""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import io
import json
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import plots
from .errors import ConfigError, DomainError, ModelError, OeeBenchError
from .ga import GaConfig, GaResult, ga_tune
from .neural import LossCurve, MlpArch, TrainConfig, mlp_train
from .oee import FEATURE_NAMES, Dataset, read_csv
from .prep import FoldPlan, SplitIndices, apply_scaler, fit_scaler, kfold, remove_outliers, train_test_split
from .stats import ErrorSample, anova_oneway, dispersion_test, mae, mape_detail, tukey_hsd
from .store import FittedModel, Learner, predict_raw
from .svr import SvrParams, rbf, svr_fit
from .synth import GenConfig, generate
from .trees import CartParams, GbtParams, RfParams, gbt_fit, rf_fit

MODEL_NAMES = ("SVR", "SVRCV", "SVRGA", "RF", "RFCV", "XGB", "XGBCV", "DL")
_FAMILY = {"SVR": "svr", "SVRCV": "svr", "SVRGA": "svr", "RF": "rf", "RFCV": "rf",
           "XGB": "gbt", "XGBCV": "gbt", "DL": "mlp"}
_CV = {"SVRCV", "SVRGA", "RFCV", "XGBCV"}


def derive_seed(seed: int, name: str) -> int:
    digest = hashlib.sha256(f"{seed}/{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little") & (2**63 - 1)


# -------------------------------------------------------------- configuration ---

@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 42
    data_path: str | None = None
    generator: GenConfig = field(default_factory=GenConfig)
    remove_outliers: bool = True
    split_ratio: float = 0.85
    cv_k: int = 10
    plot_items: int = 40
    mape_floor: float = 1.0
    svr: SvrParams = field(default_factory=SvrParams)
    ga: GaConfig = field(default_factory=lambda: GaConfig(population=12, generations=6))
    ga_folds: int = 3
    ga_max_passes: int = 50_000
    rf: RfParams = field(default_factory=RfParams)
    gbt: GbtParams = field(default_factory=GbtParams)
    mlp_arch: MlpArch = field(default_factory=MlpArch)
    mlp: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self) -> None:
        if not 0 < self.split_ratio < 1:
            raise ConfigError("split_ratio must lie in (0, 1)")
        if self.cv_k < 2 or self.ga_folds < 2:
            raise ConfigError("cv_k and ga_folds must be >= 2")
        if self.plot_items < 1:
            raise ConfigError("plot_items must be >= 1")
        if self.ga_max_passes < 1:
            raise ConfigError("ga_max_passes must be >= 1")

    def with_seed(self, seed: int) -> ExperimentConfig:
        return replace(self, seed=seed, generator=replace(self.generator, seed=seed))

    def to_text(self) -> str:
        """Canonical INI text; parsing it back yields an equal configuration."""
        sections = {
            "experiment": {
                "seed": self.seed, "data": self.data_path or "",
                "remove_outliers": "yes" if self.remove_outliers else "no",
                "split_ratio": self.split_ratio, "cv_k": self.cv_k, "plot_items": self.plot_items,
                "mape_floor": self.mape_floor,
            },
            "generator": {k.strip(): v.strip() for k, v in
                          (line.split("=", 1) for line in self.generator.to_text().splitlines())},
            "svr": {"C": self.svr.C, "epsilon": self.svr.epsilon, "gamma": self.svr.kernel.gamma,
                    "tol": self.svr.tol, "max_passes": self.svr.max_passes},
            "ga": {"population": self.ga.population, "generations": self.ga.generations,
                   "c_min": self.ga.c_bounds[0], "c_max": self.ga.c_bounds[1],
                   "gamma_min": self.ga.gamma_bounds[0], "gamma_max": self.ga.gamma_bounds[1],
                   "tournament_size": self.ga.tournament_size, "crossover_rate": self.ga.crossover_rate,
                   "mutation_sd": self.ga.mutation_sd, "elitism": self.ga.elitism,
                   "folds": self.ga_folds, "max_passes": self.ga_max_passes},
            "rf": {"n_trees": self.rf.n_trees, "mtry": "" if self.rf.mtry is None else self.rf.mtry,
                   "max_depth": self.rf.cart.max_depth, "min_samples_leaf": self.rf.cart.min_samples_leaf,
                   "min_samples_split": self.rf.cart.min_samples_split},
            "xgb": {"rounds": self.gbt.rounds, "eta": self.gbt.eta, "max_depth": self.gbt.max_depth,
                    "reg_lambda": self.gbt.reg_lambda, "gamma_reg": self.gbt.gamma_reg,
                    "min_child_weight": self.gbt.min_child_weight},
            "dl": {"hidden1": self.mlp_arch.sizes[1], "hidden2": self.mlp_arch.sizes[2],
                   "learning_rate": self.mlp.learning_rate, "epochs": self.mlp.epochs,
                   "batch_size": "" if self.mlp.batch_size is None else self.mlp.batch_size},
        }
        out = []
        for name, items in sections.items():
            out.append(f"[{name}]")
            out += [f"{k} = {v}" for k, v in items.items()]
            out.append("")
        return "\n".join(out)

    def digest(self) -> str:
        """Hash of the settings; the data location is left out since the dataset hash covers its content."""
        return hashlib.sha256(replace(self, data_path=None).to_text().encode()).hexdigest()


_SCHEMA = {
    "experiment": {"seed", "data", "remove_outliers", "split_ratio", "cv_k", "plot_items", "mape_floor"},
    "generator": {f.name for f in dataclasses.fields(GenConfig)},
    "svr": {"C", "epsilon", "gamma", "tol", "max_passes"},
    "ga": {"population", "generations", "c_min", "c_max", "gamma_min", "gamma_max", "tournament_size",
           "crossover_rate", "mutation_sd", "elitism", "folds", "max_passes"},
    "rf": {"n_trees", "mtry", "max_depth", "min_samples_leaf", "min_samples_split"},
    "xgb": {"rounds", "eta", "max_depth", "reg_lambda", "gamma_reg", "min_child_weight"},
    "dl": {"hidden1", "hidden2", "learning_rate", "epochs", "batch_size"},
}


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keep key case ("C")
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{source}: unknown key '{key}' in [{section}]")

    def get(section: str, key: str, cast: Callable[[str], Any], default):
        if not parser.has_option(section, key):
            return default
        raw = parser.get(section, key).strip()
        if raw == "":
            return None if default is None else default
        try:
            return cast(raw)
        except ValueError:
            raise ConfigError(f"{source}: bad value for [{section}] {key}: {raw!r}") from None

    def boolean(raw: str) -> bool:
        low = raw.lower()
        if low in ("1", "yes", "true", "on"):
            return True
        if low in ("0", "no", "false", "off"):
            return False
        raise ValueError(raw)

    def depth(raw: str) -> float:
        return math.inf if raw.lower() in ("inf", "none") else float(int(raw))

    base = ExperimentConfig()
    try:
        seed = get("experiment", "seed", int, base.seed)
        gen_map = dict(parser["generator"]) if parser.has_section("generator") else {}
        gen_map.setdefault("seed", str(seed))
        generator = GenConfig.from_mapping(gen_map)
        svr = SvrParams(
            C=get("svr", "C", float, base.svr.C),
            epsilon=get("svr", "epsilon", float, base.svr.epsilon),
            kernel=rbf(get("svr", "gamma", float, base.svr.kernel.gamma)),
            tol=get("svr", "tol", float, base.svr.tol),
            max_passes=get("svr", "max_passes", int, base.svr.max_passes),
        )
        ga = GaConfig(
            population=get("ga", "population", int, base.ga.population),
            generations=get("ga", "generations", int, base.ga.generations),
            c_bounds=(get("ga", "c_min", float, base.ga.c_bounds[0]), get("ga", "c_max", float, base.ga.c_bounds[1])),
            gamma_bounds=(get("ga", "gamma_min", float, base.ga.gamma_bounds[0]),
                          get("ga", "gamma_max", float, base.ga.gamma_bounds[1])),
            tournament_size=get("ga", "tournament_size", int, base.ga.tournament_size),
            crossover_rate=get("ga", "crossover_rate", float, base.ga.crossover_rate),
            mutation_sd=get("ga", "mutation_sd", float, base.ga.mutation_sd),
            elitism=get("ga", "elitism", int, base.ga.elitism),
        )
        rf = RfParams(
            n_trees=get("rf", "n_trees", int, base.rf.n_trees),
            mtry=get("rf", "mtry", int, base.rf.mtry),
            cart=CartParams(
                max_depth=get("rf", "max_depth", depth, base.rf.cart.max_depth),
                min_samples_leaf=get("rf", "min_samples_leaf", int, base.rf.cart.min_samples_leaf),
                min_samples_split=get("rf", "min_samples_split", int, base.rf.cart.min_samples_split),
            ),
        )
        gbt = GbtParams(
            rounds=get("xgb", "rounds", int, base.gbt.rounds),
            eta=get("xgb", "eta", float, base.gbt.eta),
            max_depth=get("xgb", "max_depth", int, base.gbt.max_depth),
            reg_lambda=get("xgb", "reg_lambda", float, base.gbt.reg_lambda),
            gamma_reg=get("xgb", "gamma_reg", float, base.gbt.gamma_reg),
            min_child_weight=get("xgb", "min_child_weight", float, base.gbt.min_child_weight),
        )
        arch = MlpArch((len(FEATURE_NAMES), get("dl", "hidden1", int, base.mlp_arch.sizes[1]),
                        get("dl", "hidden2", int, base.mlp_arch.sizes[2]), 1))
        mlp = TrainConfig(
            learning_rate=get("dl", "learning_rate", float, base.mlp.learning_rate),
            epochs=get("dl", "epochs", int, base.mlp.epochs),
            batch_size=get("dl", "batch_size", int, base.mlp.batch_size),
        )
        data = get("experiment", "data", str, None)
        return ExperimentConfig(
            seed=seed,
            data_path=data or None,
            generator=generator,
            remove_outliers=get("experiment", "remove_outliers", boolean, base.remove_outliers),
            split_ratio=get("experiment", "split_ratio", float, base.split_ratio),
            cv_k=get("experiment", "cv_k", int, base.cv_k),
            plot_items=get("experiment", "plot_items", int, base.plot_items),
            mape_floor=get("experiment", "mape_floor", float, base.mape_floor),
            svr=svr, ga=ga,
            ga_folds=get("ga", "folds", int, base.ga_folds),
            ga_max_passes=get("ga", "max_passes", int, base.ga_max_passes),
            rf=rf, gbt=gbt, mlp_arch=arch, mlp=mlp,
        )
    except DomainError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    cfg = parse_config(text, str(path))
    if cfg.data_path and not Path(cfg.data_path).is_absolute():
        cfg = replace(cfg, data_path=str(path.parent / cfg.data_path))
    return cfg


# ------------------------------------------------------------------ data ---

@dataclass(frozen=True, eq=False)
class PreparedData:
    dataset: Dataset
    removed: np.ndarray
    split: SplitIndices
    folds: FoldPlan
    scaler_train: Any
    X_all: np.ndarray  # every kept row, scaled; indexed by split and fold indices
    y_all: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray


def dataset_digest(dataset: Dataset) -> str:
    h = hashlib.sha256()
    h.update(",".join(dataset.feature_names).encode())
    h.update(np.ascontiguousarray(dataset.rows, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(dataset.target, dtype="<f8").tobytes())
    return h.hexdigest()


def load_dataset(config: ExperimentConfig) -> Dataset:
    if config.data_path:
        return read_csv(config.data_path)
    return generate(config.generator)


def prepare(dataset: Dataset, config: ExperimentConfig) -> PreparedData:
    if len(dataset) == 0:
        raise DomainError("dataset is empty")
    if np.any(~np.isfinite(dataset.target)):
        raise DomainError("dataset has missing OEE targets")
    if config.remove_outliers:
        dataset, removed = remove_outliers(dataset)
    else:
        removed = np.zeros(0, dtype=int)
    split = train_test_split(dataset, config.split_ratio, derive_seed(config.seed, "split"))
    folds = kfold(split.train, config.cv_k, derive_seed(config.seed, "folds"))
    scaler = fit_scaler(dataset.rows[split.train])
    return PreparedData(
        dataset, removed, split, folds, scaler,
        apply_scaler(scaler, dataset.rows), dataset.target,
        apply_scaler(scaler, dataset.rows[split.test]), dataset.target[split.test],
    )


# --------------------------------------------------------------- model runs ---

@dataclass(frozen=True, eq=False)
class ModelRun:
    name: str
    fitted: FittedModel
    test_pred: np.ndarray
    mae: float
    mape: float
    mape_excluded: int
    cv_mae: float | None
    cv_mape: float | None
    wall_time_s: float
    converged: bool = True
    ga: GaResult | None = None
    loss_curve: LossCurve | None = None

    def row(self) -> dict:
        return {"mae": self.mae, "mape": self.mape, "mape_excluded": self.mape_excluded,
                "cv_mae": self.cv_mae, "cv_mape": self.cv_mape, "converged": self.converged,
                "wall_time_s": self.wall_time_s}


def _fit(family: str, X, y, config: ExperimentConfig, name: str, svr_params: SvrParams,
         X_eval=None, y_eval=None) -> tuple[Learner, bool, LossCurve | None]:
    if family == "svr":
        model = svr_fit(X, y, svr_params)
        return model, model.converged, None
    if family == "rf":
        return rf_fit(X, y, replace(config.rf, seed=derive_seed(config.seed, name))), True, None
    if family == "gbt":
        return gbt_fit(X, y, replace(config.gbt, seed=derive_seed(config.seed, name))), True, None
    if family == "mlp":
        X_eval = np.zeros((0, X.shape[1])) if X_eval is None else X_eval
        y_eval = np.zeros(0) if y_eval is None else y_eval
        model, curve = mlp_train(X, y, X_eval, y_eval, config.mlp_arch,
                                 replace(config.mlp, seed=derive_seed(config.seed, name)))
        return model, True, curve
    raise ConfigError(f"unknown model family '{family}'")


def run_config(name: str, data: PreparedData, config: ExperimentConfig) -> ModelRun:
    """Fit one of the eight configurations and score it on the shared test set."""
    if name not in MODEL_NAMES:
        raise ConfigError(f"unknown model configuration '{name}'; expected one of {', '.join(MODEL_NAMES)}")
    family = _FAMILY[name]
    start = time.perf_counter()
    svr_params = config.svr
    ga_result = None
    try:
        if name == "SVRGA":
            ga_folds = kfold(data.split.train, config.ga_folds, derive_seed(config.seed, "ga-folds"))
            ga_result = ga_tune(
                data.X_all, data.y_all, ga_folds,
                replace(config.svr, max_passes=config.ga_max_passes),
                replace(config.ga, seed=derive_seed(config.seed, name)),
            )
            if not math.isfinite(ga_result.best_fitness):
                raise ModelError("no GA individual produced a converged SVR")
            svr_params = replace(config.svr, C=ga_result.best_c, kernel=rbf(ga_result.best_gamma))

        cv_mae = cv_mape = None
        converged = True
        if name in _CV:
            maes, mapes = [], []
            for i, fold in enumerate(data.folds.folds):
                train = data.folds.complement(i)
                learner, ok, _ = _fit(family, data.X_all[train], data.y_all[train], config, name, svr_params)
                converged &= ok
                pred = predict_raw(learner, data.X_all[fold])
                maes.append(mae(data.y_all[fold], pred))
                mapes.append(mape_detail(data.y_all[fold], pred, config.mape_floor)[0])
            cv_mae, cv_mape = float(np.mean(maes)), float(np.mean(mapes))

        train = data.split.train
        learner, ok, curve = _fit(family, data.X_all[train], data.y_all[train], config, name, svr_params,
                                  data.X_test, data.y_test)
        converged &= ok
    except OeeBenchError as exc:
        raise ModelError(f"{name}: {exc}") from exc

    pred = predict_raw(learner, data.X_test)
    test_mape, excluded = mape_detail(data.y_test, pred, config.mape_floor)
    fitted = FittedModel(name, data.dataset.feature_names, data.scaler_train, learner,
                         {"C": svr_params.C, "gamma": svr_params.kernel.gamma} if family == "svr" else {})
    return ModelRun(
        name, fitted, pred, mae(data.y_test, pred), test_mape, excluded, cv_mae, cv_mape,
        time.perf_counter() - start, converged, ga_result, curve,
    )


# ---------------------------------------------------------------- compare ---

@dataclass(frozen=True, eq=False)
class EvalReport:
    runs: tuple[ModelRun, ...]
    baseline: dict
    stats: dict
    provenance: dict
    partial: bool = False
    error: str | None = None

    def to_json(self) -> dict:
        return {
            "models": {r.name: r.row() for r in self.runs},
            "baseline_mean_predictor": self.baseline,
            "stats": self.stats,
            "svrga": None if not any(r.ga for r in self.runs) else _ga_block(
                next(r.ga for r in self.runs if r.ga)),
            "provenance": self.provenance,
            "partial": self.partial,
            "error": self.error,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("model,mae,mape,cv_mae,cv_mape,wall_time_s\n")
        for r in self.runs:
            cells = [r.name, _num(r.mae), _num(r.mape), _num(r.cv_mae), _num(r.cv_mape), f"{r.wall_time_s:.3f}"]
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()


def _num(v: float | None) -> str:
    return "" if v is None else f"{v:.6f}"


def _ga_block(ga: GaResult) -> dict:
    return {"best_c": ga.best_c, "best_gamma": ga.best_gamma, "best_fitness": ga.best_fitness,
            "history": ga.history.tolist(), "n_evaluations": ga.n_evaluations}


def _stats_block(runs: list[ModelRun], y_test: np.ndarray) -> dict:
    samples = [ErrorSample.from_predictions(r.name, y_test, r.test_pred) for r in runs]
    groups = {s.model_name: s.abs_errors for s in samples}
    anova = anova_oneway(list(groups.values()))
    tukey = tukey_hsd(groups)
    w, p = dispersion_test(list(groups.values()))
    return {
        "anova": anova.to_dict(),
        "tukey": [pair.to_dict() for pair in tukey.pairwise],
        "tukey_q": tukey.q_crit,
        "dispersion": {"test": "brown-forsythe", "w_stat": w, "p_value": p},
        "letters": tukey.letter_groups,
    }


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


def compare(config: ExperimentConfig, out_dir: str | Path,
            progress: Callable[[str], None] | None = None) -> EvalReport:
    """Run all eight configurations on one split and write reports and figures to ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    raw = load_dataset(config)
    data = prepare(raw, config)
    provenance = {
        "seed": config.seed,
        "config_hash": config.digest(),
        "dataset_hash": dataset_digest(raw),
        "n_rows": len(raw),
        "n_removed_outliers": int(data.removed.shape[0]),
        "n_train": int(data.split.train.shape[0]),
        "n_test": int(data.split.test.shape[0]),
        "cv_k": config.cv_k,
    }
    baseline_pred = np.full(data.y_test.shape[0], float(np.mean(data.y_all[data.split.train])))
    baseline = {"mae": mae(data.y_test, baseline_pred),
                "mape": mape_detail(data.y_test, baseline_pred, config.mape_floor)[0]}

    runs: list[ModelRun] = []
    for name in MODEL_NAMES:
        if progress:
            progress(f"running {name}")
        try:
            runs.append(run_config(name, data, config))
        except OeeBenchError as exc:
            report = EvalReport(tuple(runs), baseline, {}, provenance, True, str(exc))
            _write_json(out / "report.json", report.to_json())
            (out / "report.csv").write_text(report.to_csv(), encoding="utf-8")
            raise ModelError(f"comparison aborted: {exc}") from exc

    report = EvalReport(tuple(runs), baseline, _stats_block(runs, data.y_test), provenance)
    _write_json(out / "report.json", report.to_json())
    (out / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    _write_artifacts(out, report, data, config, raw)
    return report


def _write_artifacts(out: Path, report: EvalReport, data: PreparedData, config: ExperimentConfig,
                     raw: Dataset) -> None:
    items = min(config.plot_items, data.y_test.shape[0])
    y40 = data.y_test[:items]
    pred_lines = ["test_index,y_true," + ",".join(r.name for r in report.runs)]
    for i in range(data.y_test.shape[0]):
        cells = [str(int(data.split.test[i])), f"{data.y_test[i]:.6g}"]
        cells += [f"{r.test_pred[i]:.10g}" for r in report.runs]
        pred_lines.append(",".join(cells))
    (out / "predictions.csv").write_text("\n".join(pred_lines) + "\n", encoding="utf-8")

    err_lines = [",".join(r.name for r in report.runs)]
    errors = np.column_stack([np.abs(data.y_test - r.test_pred) for r in report.runs])
    err_lines += [",".join(f"{v:.10g}" for v in row) for row in errors]
    (out / "errors.csv").write_text("\n".join(err_lines) + "\n", encoding="utf-8")

    for r in report.runs:
        plots.plot_predictions(y40, r.test_pred[:items], out / f"predictions_{r.name}.svg",
                               expected=config.plot_items)
        if r.loss_curve is not None:
            (out / f"loss_curve_{r.name}.csv").write_text(r.loss_curve.to_csv(), encoding="utf-8")
            if len(r.loss_curve):
                plots.plot_loss_curve(r.loss_curve, out / f"loss_curve_{r.name}.svg")
        if r.ga is not None:
            (out / f"ga_history_{r.name}.csv").write_text(r.ga.history_csv(), encoding="utf-8")
    samples = [ErrorSample.from_predictions(r.name, data.y_test, r.test_pred) for r in report.runs]
    plots.plot_error_boxplots(samples, out / "error_boxplots.svg")
    plots.plot_tukey_ci(tukey_hsd({s.model_name: s.abs_errors for s in samples}), out / "tukey_ci.svg")
    plots.plot_histogram(raw.target, 30, out / "oee_histogram.svg")
