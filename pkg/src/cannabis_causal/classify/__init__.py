"""Shared supervised learners: logistic regression, boosted trees, calibration."""

import numpy as np

from .boosting import GradientBoostingClassifier, RegressionTree, fit_gbm
from .calibration import SigmoidCalibratedClassifier, calibrate
from .logistic import LogisticRegression, compute_class_weights, fit_logistic, logistic_loss_and_grad
from .serialize import dump_model, load_model, model_from_dict, model_to_dict


def predict_proba(model, x):
    """Class probabilities for a single row or a matrix of rows."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    proba = model.predict_proba(x[None, :] if single else x)
    return proba[0] if single else proba


__all__ = [
    "GradientBoostingClassifier",
    "LogisticRegression",
    "RegressionTree",
    "SigmoidCalibratedClassifier",
    "calibrate",
    "compute_class_weights",
    "dump_model",
    "fit_gbm",
    "fit_logistic",
    "load_model",
    "logistic_loss_and_grad",
    "model_from_dict",
    "model_to_dict",
    "predict_proba",
]
