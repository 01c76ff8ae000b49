"""Versioned JSON encoding of fitted models."""

import json

import numpy as np

from .boosting import GradientBoostingClassifier, RegressionTree
from .calibration import SigmoidCalibratedClassifier
from .logistic import LogisticRegression

FORMAT_VERSION = 1


def _classes(values):
    return [v.item() if hasattr(v, "item") else v for v in values]


def model_to_dict(model):
    if isinstance(model, SigmoidCalibratedClassifier):
        return {
            "kind": "calibrated",
            "base": model_to_dict(model.estimator_),
            "scale": model.scale_.tolist(),
            "offset": model.offset_.tolist(),
            "holdout_fraction": model.holdout_fraction,
        }
    if isinstance(model, LogisticRegression):
        return {
            "kind": "logistic",
            "classes": _classes(model.classes_),
            "coef": model.coef_.tolist(),
            "intercept": model.intercept_.tolist(),
            "C": model.C,
            "class_weight": model.class_weight_.tolist(),
        }
    if isinstance(model, GradientBoostingClassifier):
        return {
            "kind": "gbm",
            "classes": _classes(model.classes_),
            "init": model.init_,
            "learning_rate": model.learning_rate,
            "max_depth": model.max_depth,
            "n_features": model.n_features_in_,
            "trees": [t.to_dict() for t in model.estimators_],
        }
    raise TypeError(f"cannot serialise {type(model).__name__}")


def model_from_dict(data):
    kind = data["kind"]
    if kind == "calibrated":
        base = model_from_dict(data["base"])
        model = SigmoidCalibratedClassifier(base, holdout_fraction=data["holdout_fraction"])
        model.estimator_ = base
        model.classes_ = base.classes_
        model.scale_ = np.array(data["scale"])
        model.offset_ = np.array(data["offset"])
        model.n_features_in_ = base.n_features_in_
        return model
    if kind == "logistic":
        model = LogisticRegression(C=data["C"])
        model.classes_ = np.array(data["classes"])
        model.coef_ = np.array(data["coef"], dtype=float)
        model.intercept_ = np.array(data["intercept"], dtype=float)
        model.class_weight_ = np.array(data["class_weight"])
        model.n_features_in_ = model.coef_.shape[1]
        return model
    if kind == "gbm":
        model = GradientBoostingClassifier(
            n_estimators=len(data["trees"]), max_depth=data["max_depth"], learning_rate=data["learning_rate"]
        )
        model.classes_ = np.array(data["classes"])
        model.init_ = data["init"]
        model.n_features_in_ = data["n_features"]
        model.estimators_ = [RegressionTree(**t) for t in data["trees"]]
        return model
    raise ValueError(f"unknown model kind {kind!r}")


def dump_model(model, path):
    payload = {"format_version": FORMAT_VERSION, "model": model_to_dict(model)}
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True)


def load_model(path):
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {payload.get('format_version')!r}")
    return model_from_dict(payload["model"])
