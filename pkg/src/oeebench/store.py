"""Fitted-model container with JSON persistence: learner, scaler and feature layout."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .errors import ModelError
from .neural import MlpModel, MlpWeights, TrainConfig, forward
from .prep import ScalerParams, apply_scaler
from .svr import SvrModel, svr_predict
from .trees import ForestModel, GbtModel, gbt_predict, rf_predict

FORMAT = "oeebench-model"
VERSION = 1

Learner = Union[SvrModel, ForestModel, GbtModel, MlpModel]


def _family(model: Learner) -> str:
    if isinstance(model, SvrModel):
        return "svr"
    if isinstance(model, ForestModel):
        return "rf"
    if isinstance(model, GbtModel):
        return "gbt"
    if isinstance(model, MlpModel):
        return "mlp"
    raise ModelError(f"unsupported learner type {type(model).__name__}")


def predict_raw(model: Learner, Z: np.ndarray) -> np.ndarray:
    """Predict from already-scaled features."""
    if isinstance(model, SvrModel):
        return svr_predict(model, Z)
    if isinstance(model, ForestModel):
        return rf_predict(model, Z)
    if isinstance(model, GbtModel):
        return gbt_predict(model, Z)
    if isinstance(model, MlpModel):
        return forward(model.weights, Z)[0]
    raise ModelError(f"unsupported learner type {type(model).__name__}")


@dataclass(frozen=True, eq=False)
class FittedModel:
    name: str
    feature_names: tuple[str, ...]
    scaler: ScalerParams
    learner: Learner
    meta: dict | None = None

    @property
    def family(self) -> str:
        return _family(self.learner)

    def predict(self, rows: np.ndarray) -> np.ndarray:
        return predict_raw(self.learner, apply_scaler(self.scaler, rows))

    def to_dict(self) -> dict:
        if isinstance(self.learner, MlpModel):
            body = {"weights": self.learner.weights.to_dict()}
        else:
            body = self.learner.to_dict()
        return {
            "format": FORMAT,
            "version": VERSION,
            "name": self.name,
            "family": self.family,
            "feature_names": list(self.feature_names),
            "scaler": self.scaler.to_dict(),
            "model": body,
            "meta": self.meta or {},
        }

    @classmethod
    def from_dict(cls, d: dict) -> FittedModel:
        if d.get("format") != FORMAT:
            raise ModelError("not a saved model file")
        if d.get("version") != VERSION:
            raise ModelError(f"unsupported model file version {d.get('version')}")
        family, body = d["family"], d["model"]
        try:
            if family == "svr":
                learner: Learner = SvrModel.from_dict(body)
            elif family == "rf":
                learner = ForestModel.from_dict(body)
            elif family == "gbt":
                learner = GbtModel.from_dict(body)
            elif family == "mlp":
                learner = MlpModel(MlpWeights.from_dict(body["weights"]), TrainConfig())
            else:
                raise ModelError(f"unknown model family '{family}'")
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelError(f"corrupt model file: {exc}") from exc
        return cls(d["name"], tuple(d["feature_names"]), ScalerParams.from_dict(d["scaler"]),
                   learner, d.get("meta") or {})


def save_model(model: FittedModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model.to_dict()), encoding="utf-8")


def load_model(path: str | Path) -> FittedModel:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ModelError(f"model file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ModelError(f"model file {path} is not valid JSON: {exc}") from None
    return FittedModel.from_dict(d)
