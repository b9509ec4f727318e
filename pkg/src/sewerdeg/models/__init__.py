"""Six probabilistic classifiers behind one interface, plus JSON artifacts."""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

from sewerdeg.errors import ValidationError
from sewerdeg.models.base import Classifier, sigmoid
from sewerdeg.models.boosting import BoostConfig, BoostedModel, boost_fit
from sewerdeg.models.logistic import LogisticConfig, LogisticModel, lr_fit, lr_predict_proba
from sewerdeg.models.mlp import MlpConfig, MlpModel, mlp_fit
from sewerdeg.models.svm import SvmConfig, SvmModel, svm_fit
from sewerdeg.models.tree import ForestConfig, ForestModel, TreeConfig, TreeModel, forest_fit, tree_fit

ARTIFACT_FORMAT = "sewerdeg-model"
ARTIFACT_VERSION = 1

MODEL_NAMES = ("lr", "dt", "svm", "xgb", "ann", "rf")
MODEL_LABELS = {"lr": "LR", "dt": "DT", "svm": "SVM", "xgb": "XGB", "ann": "ANN", "rf": "RF"}

CONFIGS = {
    "lr": LogisticConfig,
    "dt": TreeConfig,
    "rf": ForestConfig,
    "xgb": BoostConfig,
    "svm": SvmConfig,
    "ann": MlpConfig,
}
_CLASSES = {
    "lr": LogisticModel,
    "dt": TreeModel,
    "rf": ForestModel,
    "xgb": BoostedModel,
    "svm": SvmModel,
    "ann": MlpModel,
}


def make_config(name: str, params: dict | None = None):
    """Build a model config from plain values, rejecting unknown keys."""
    if name not in CONFIGS:
        raise ValidationError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}")
    cls = CONFIGS[name]
    params = dict(params or {})
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(params) - known)
    if unknown:
        raise ValidationError(f"unknown {name} parameter(s): {', '.join(unknown)}")
    for key, val in params.items():
        if isinstance(val, list):
            params[key] = tuple(val)
    return cls(**params)


def config_dict(config) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in dataclasses.asdict(config).items()}


def fit_model(name: str, X, y=None, config=None, seed: int = 0, columns=None) -> Classifier:
    cfg = config if config is not None else make_config(name)
    if name == "lr":
        return lr_fit(X, y, cfg, columns=columns, seed=seed)
    if name == "dt":
        return tree_fit(X, y, cfg, columns=columns, seed=seed)
    if name == "rf":
        return forest_fit(X, y, cfg, seed=seed, columns=columns)
    if name == "xgb":
        return boost_fit(X, y, cfg, columns=columns, seed=seed)
    if name == "svm":
        return svm_fit(X, y, cfg, seed=seed, columns=columns)
    if name == "ann":
        return mlp_fit(X, y, cfg, seed=seed, columns=columns)
    raise ValidationError(f"unknown model {name!r}")


def model_to_dict(model: Classifier, config=None) -> dict:
    out = {
        "format": ARTIFACT_FORMAT,
        "version": ARTIFACT_VERSION,
        "model": model.name,
        "columns": list(model.columns),
        "seed": model.seed,
        "config": None if config is None else config_dict(config),
        "params": model.to_dict(),
    }
    if isinstance(model, LogisticModel):
        out["inference"] = {
            "scale": "min-max scaled design matrix",
            "coefficients": model.inference_table(),
            "null_deviance": model.null_deviance,
            "deviance": model.deviance,
            "chi2": model.chi2,
            "chi2_df": model.chi2_df,
            "chi2_p": model.chi2_p,
            "n_obs": model.n_obs,
            "converged": model.converged,
            "separation": model.separation,
        }
    return out


def model_from_dict(d: dict) -> Classifier:
    if d.get("format") != ARTIFACT_FORMAT:
        raise ValidationError("not a model artifact")
    if d.get("version") != ARTIFACT_VERSION:
        raise ValidationError(f"unsupported model artifact version {d.get('version')}")
    cls = _CLASSES.get(d["model"])
    if cls is None:
        raise ValidationError(f"unknown model {d['model']!r}")
    return cls.from_dict(d["columns"], d["params"], d.get("seed"))


def save_model(model: Classifier, path, config=None) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model, config), indent=1, sort_keys=True) + "\n", encoding="utf-8")


def load_model(path) -> Classifier:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


__all__ = [
    "BoostConfig", "BoostedModel", "Classifier", "ForestConfig", "ForestModel", "LogisticConfig",
    "LogisticModel", "MlpConfig", "MlpModel", "MODEL_NAMES", "SvmConfig", "SvmModel", "TreeConfig",
    "TreeModel", "boost_fit", "fit_model", "forest_fit", "load_model", "lr_fit", "lr_predict_proba",
    "make_config", "mlp_fit", "model_from_dict", "model_to_dict", "save_model", "sigmoid", "svm_fit",
    "tree_fit",
]
