"""Propensity-score models with balanced class weights."""

import numpy as np

from ..classify import GradientBoostingClassifier, LogisticRegression

MODEL_KINDS = ("LR", "GBM")
_EPS = 1e-12


def make_propensity_model(kind="LR", C=1.0, n_estimators=100, max_depth=3, learning_rate=0.1):
    kind = str(kind).upper()
    if kind == "LR":
        return LogisticRegression(C=C, class_weight="balanced")
    if kind == "GBM":
        return GradientBoostingClassifier(
            n_estimators=n_estimators, max_depth=max_depth, learning_rate=learning_rate,
            class_weight="balanced",
        )
    raise ValueError(f"unknown propensity model {kind!r}; expected one of {MODEL_KINDS}")


def fit_propensity(X, T, model_kind="LR", return_model=False, **params):
    """Scores ``e_i = P(T=1 | X_i)`` from a balanced-class-weight classifier.

    Scores are clipped into the open unit interval.
    """
    T = np.asarray(T).astype(int)
    if len(np.unique(T)) < 2:
        raise ValueError("propensity model needs both treated and control units")
    model = make_propensity_model(model_kind, **params).fit(X, T)
    e = np.clip(model.predict_proba(X)[:, 1], _EPS, 1.0 - _EPS)
    return (e, model) if return_model else e
