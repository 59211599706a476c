"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 data error, 3 model error.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import plots
from .errors import ConfigError, DataError, DomainError, ModelError
from .ga import GaResult
from .neural import LossCurve
from .oee import read_csv, write_csv
from .pipeline import (MODEL_NAMES, ExperimentConfig, compare, derive_seed, load_config,
                       load_dataset, prepare, run_config)
from .prep import kfold, remove_outliers, train_test_split
from .stats import ErrorSample, tukey_hsd
from .store import load_model, save_model
from .synth import GenConfig, generate

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_MODEL = 0, 1, 2, 3
PLOT_KINDS = ("histogram", "predictions", "loss", "boxplot", "tukey")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="oeebench", description="OEE prediction benchmark")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic shift dataset")
    g.add_argument("--seed", type=int, default=42)
    g.add_argument("--rows", type=int, default=1917)
    g.add_argument("--out", required=True)
    g.add_argument("--save-config", help="also write the generator settings as key = value text")

    pr = sub.add_parser("prepare", help="remove OEE outliers and report the split")
    pr.add_argument("--in", dest="inp", required=True)
    pr.add_argument("--out", required=True)
    pr.add_argument("--no-outlier-removal", action="store_true")
    pr.add_argument("--seed", type=int, default=42)
    pr.add_argument("--ratio", type=float, default=0.85)
    pr.add_argument("--k", type=int, default=10)
    pr.add_argument("--split-out", help="write train/test/fold indices as JSON")

    t = sub.add_parser("train", help="fit one model configuration and save it")
    t.add_argument("--model", required=True, choices=MODEL_NAMES)
    t.add_argument("--config", required=True)
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int)

    ga = sub.add_parser("tune-ga", help="genetic search over SVR C and gamma")
    ga.add_argument("--config", required=True)
    ga.add_argument("--data", required=True)
    ga.add_argument("--history-out", help="write per-generation history CSV")
    ga.add_argument("--seed", type=int)

    c = sub.add_parser("compare", help="run all eight configurations and write reports")
    c.add_argument("--config", required=True)
    c.add_argument("--out-dir", required=True)
    c.add_argument("--data", help="override the data source named in the config")
    c.add_argument("--seed", type=int)

    pd = sub.add_parser("predict", help="predict OEE for every row of a CSV")
    pd.add_argument("--model", required=True)
    pd.add_argument("--in", dest="inp", required=True)
    pd.add_argument("--out", required=True)

    pl = sub.add_parser("plot", help="render an SVG figure")
    pl.add_argument("--kind", required=True, choices=PLOT_KINDS)
    pl.add_argument("--in", dest="inp", required=True)
    pl.add_argument("--out", required=True)
    pl.add_argument("--bins", type=int, default=30)
    pl.add_argument("--column", help="prediction column for --kind predictions")
    pl.add_argument("--items", type=int, default=40)
    return p


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if getattr(args, "data", None):
        cfg = replace(cfg, data_path=args.data)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _cmd_generate(args) -> int:
    if args.rows < 1:
        raise UsageError("--rows must be >= 1")
    gen = GenConfig(seed=args.seed, n_rows=args.rows)
    write_csv(generate(gen), args.out)
    if args.save_config:
        Path(args.save_config).write_text(gen.to_text(), encoding="utf-8")
    print(f"wrote {args.rows} rows to {args.out}")
    return EXIT_OK


def _cmd_prepare(args) -> int:
    data = read_csv(args.inp)
    removed = np.zeros(0, dtype=int)
    if not args.no_outlier_removal:
        data, removed = remove_outliers(data)
    write_csv(data, args.out)
    split = train_test_split(data, args.ratio, derive_seed(args.seed, "split"))
    folds = kfold(split.train, args.k, derive_seed(args.seed, "folds"))
    if args.split_out:
        payload = {"train": split.train.tolist(), "test": split.test.tolist(),
                   "folds": [f.tolist() for f in folds.folds], "removed": removed.tolist()}
        Path(args.split_out).write_text(json.dumps(payload), encoding="utf-8")
    print(f"kept {len(data)} rows ({removed.shape[0]} outliers removed); "
          f"train {split.train.shape[0]}, test {split.test.shape[0]}, {args.k} folds")
    return EXIT_OK


def _cmd_train(args) -> int:
    cfg = _config(args)
    run = run_config(args.model, prepare(load_dataset(cfg), cfg), cfg)
    save_model(run.fitted, args.out)
    cv = "" if run.cv_mae is None else f" cv_mae={run.cv_mae:.4f}"
    print(f"{run.name}: test mae={run.mae:.4f} mape={run.mape:.4f}{cv}")
    return EXIT_OK


def _cmd_tune_ga(args) -> int:
    cfg = _config(args)
    run = run_config("SVRGA", prepare(load_dataset(cfg), cfg), cfg)
    ga: GaResult = run.ga
    if args.history_out:
        Path(args.history_out).write_text(ga.history_csv(), encoding="utf-8")
    print(f"best C={ga.best_c:.6g} gamma={ga.best_gamma:.6g} cv_mae={ga.best_fitness:.4f}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    cfg = _config(args)
    report = compare(cfg, args.out_dir, progress=lambda m: print(m, file=sys.stderr, flush=True))
    sys.stdout.write(report.to_csv())
    return EXIT_OK


def _cmd_predict(args) -> int:
    model = load_model(args.model)
    data = read_csv(args.inp, require_target=False)
    pred = model.predict(data.rows)
    lines = ["row,oee_pred"] + [f"{i},{v:.10g}" for i, v in enumerate(pred)]
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {pred.shape[0]} predictions to {args.out}")
    return EXIT_OK


def _read_table(path: str) -> tuple[list[str], np.ndarray]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"no such file: {path}") from None
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in lines[0].split(",")]
    try:
        body = np.array([[float(c) for c in ln.split(",")] for ln in lines[1:]], dtype=float)
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric cell ({exc})") from None
    if body.size and body.shape[1] != len(header):
        raise DataError(f"{path}: ragged rows")
    return header, body.reshape(-1, len(header))


def _cmd_plot(args) -> int:
    if args.kind == "histogram":
        plots.plot_histogram(read_csv(args.inp).target, args.bins, args.out)
    elif args.kind == "predictions":
        header, body = _read_table(args.inp)
        if "y_true" not in header:
            raise DataError(f"{args.inp}: needs a y_true column")
        column = args.column or next((h for h in header if h not in ("test_index", "y_true")), None)
        if column not in header:
            raise DataError(f"{args.inp}: no prediction column {column!r}")
        n = min(args.items, body.shape[0])
        plots.plot_predictions(body[:n, header.index("y_true")], body[:n, header.index(column)],
                               args.out, expected=args.items)
    elif args.kind == "loss":
        header, body = _read_table(args.inp)
        if header[:3] != ["epoch", "train_mae", "test_mae"]:
            raise DataError(f"{args.inp}: expected epoch,train_mae,test_mae columns")
        plots.plot_loss_curve(LossCurve(body[:, 1], body[:, 2]), args.out)
    else:
        header, body = _read_table(args.inp)
        samples = [ErrorSample(h, body[:, j]) for j, h in enumerate(header)]
        if args.kind == "boxplot":
            plots.plot_error_boxplots(samples, args.out)
        else:
            plots.plot_tukey_ci(tukey_hsd({s.model_name: s.abs_errors for s in samples}), args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


_COMMANDS = {
    "generate": _cmd_generate, "prepare": _cmd_prepare, "train": _cmd_train, "tune-ga": _cmd_tune_ga,
    "compare": _cmd_compare, "predict": _cmd_predict, "plot": _cmd_plot,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DomainError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ModelError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
