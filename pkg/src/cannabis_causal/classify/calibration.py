"""Holdout sigmoid (Platt-style) calibration, one-vs-rest for multi-class."""

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin, clone
from sklearn.model_selection import train_test_split
from sklearn.utils.validation import check_is_fitted, check_X_y

_EPS = 1e-12


def _logit(p):
    p = np.clip(p, _EPS, 1 - _EPS)
    return np.log(p) - np.log1p(-p)


def fit_sigmoid(scores, targets):
    """Fit ``P(target=1) = sigmoid(a * score + b)`` by maximum likelihood."""
    scores = np.asarray(scores, dtype=float)
    t = np.asarray(targets, dtype=float)

    def fun(ab):
        z = ab[0] * scores + ab[1]
        loss = np.sum(np.logaddexp(0.0, z) - t * z)
        r = expit(z) - t
        return loss, np.array([r @ scores, r.sum()])

    res = minimize(fun, np.array([1.0, 0.0]), jac=True, method="L-BFGS-B",
                   options={"gtol": 1e-10, "ftol": 1e-15, "maxiter": 1000})
    return float(res.x[0]), float(res.x[1])


def apply_sigmoids(proba, scale, offset):
    """Map base probabilities through fitted sigmoids and renormalise."""
    proba = np.asarray(proba, dtype=float)
    if proba.shape[1] == 2 and len(scale) == 1:
        p1 = expit(scale[0] * _logit(proba[:, 1]) + offset[0])
        return np.column_stack([1.0 - p1, p1])
    out = expit(np.asarray(scale) * _logit(proba) + np.asarray(offset))
    out = np.clip(out, _EPS, None)
    return out / out.sum(axis=1, keepdims=True)


class SigmoidCalibratedClassifier(BaseEstimator, ClassifierMixin):
    """Fit ``estimator`` on a stratified share of the data and calibrate on the rest.

    Binary models get a single sigmoid on the positive-class logit, which
    keeps the ranking intact whenever the fitted scale is positive.
    Multi-class models get one sigmoid per class followed by renormalisation.
    """

    def __init__(self, estimator, holdout_fraction=0.2, random_state=0):
        self.estimator = estimator
        self.holdout_fraction = holdout_fraction
        self.random_state = random_state

    def fit(self, X, y, sample_weight=None):
        X, y = check_X_y(X, y, dtype=np.float64)
        idx = np.arange(len(y))
        train_idx, hold_idx = train_test_split(
            idx, test_size=self.holdout_fraction, random_state=self.random_state, stratify=y
        )
        base = clone(self.estimator)
        if sample_weight is None:
            base.fit(X[train_idx], y[train_idx])
        else:
            base.fit(X[train_idx], y[train_idx], sample_weight=np.asarray(sample_weight)[train_idx])
        self.estimator_ = base
        return self.fit_holdout(X[hold_idx], y[hold_idx])

    def fit_holdout(self, X_hold, y_hold):
        """Fit the sigmoid maps on a holdout set for an already-fitted ``estimator_``."""
        if not hasattr(self, "estimator_"):
            self.estimator_ = self.estimator
        check_is_fitted(self.estimator_)
        self.classes_ = self.estimator_.classes_
        missing = set(self.classes_) - set(np.unique(y_hold))
        if missing:
            raise ValueError(f"calibration holdout lacks classes {sorted(missing)}")
        proba = self.estimator_.predict_proba(X_hold)
        if len(self.classes_) == 2:
            a, b = fit_sigmoid(_logit(proba[:, 1]), y_hold == self.classes_[1])
            self.scale_, self.offset_ = np.array([a]), np.array([b])
        else:
            fits = [fit_sigmoid(_logit(proba[:, k]), y_hold == c) for k, c in enumerate(self.classes_)]
            self.scale_ = np.array([a for a, _ in fits])
            self.offset_ = np.array([b for _, b in fits])
        self.n_features_in_ = getattr(self.estimator_, "n_features_in_", X_hold.shape[1])
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "scale_")
        return apply_sigmoids(self.estimator_.predict_proba(X), self.scale_, self.offset_)

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]


def calibrate(model, X, y, holdout_fraction=0.2, seed=0):
    """Refit ``model`` on ``1 - holdout_fraction`` of the data and calibrate on the rest."""
    return SigmoidCalibratedClassifier(model, holdout_fraction=holdout_fraction, random_state=seed).fit(X, y)
