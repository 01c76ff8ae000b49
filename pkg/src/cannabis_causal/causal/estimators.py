"""Estimator wrappers with a scikit-learn style interface.

Each estimator is fitted on covariates ``X``, treatment flags ``T`` and
outcomes ``Y`` (a vector, or a matrix with one column per horizon) and
exposes ``ate_`` plus a ``balance_`` pair of per-dimension ASMD arrays.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .balance import asmd_columns
from .effects import ate_matched, naive_difference
from .matching import nnm_match, psm_match
from .propensity import fit_propensity
from .weighting import DEFAULT_TRIM, ate_iptw, iptw_weights


def _validate(X, T, Y):
    X = check_array(X, dtype=np.float64)
    T = np.asarray(T).astype(int).ravel()
    Y = np.asarray(Y, dtype=float)
    if len(T) != len(X) or len(Y) != len(X):
        raise ValueError("X, T and Y must have the same number of rows")
    if not np.isin(T, (0, 1)).all():
        raise ValueError("T must be binary")
    if T.sum() == 0 or T.sum() == len(T):
        raise ValueError("both treated and control units are required")
    return X, T.astype(bool), Y


class _PropensityMixin:
    def _scores(self, X, T, e):
        if e is not None:
            e = np.asarray(e, dtype=float).ravel()
            if len(e) != len(X):
                raise ValueError("e must have one score per row of X")
            return e
        return fit_propensity(
            X, T, self.propensity, C=self.C, n_estimators=self.n_estimators,
            max_depth=self.max_depth, learning_rate=self.learning_rate,
        )


class IPTWEstimator(_PropensityMixin, BaseEstimator):
    """Normalised inverse probability of treatment weighting with score trimming."""

    def __init__(self, propensity="LR", trim=DEFAULT_TRIM, C=1.0, n_estimators=100,
                 max_depth=3, learning_rate=0.1):
        self.propensity = propensity
        self.trim = trim
        self.C = C
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.learning_rate = learning_rate

    def fit(self, X, T, Y, e=None):
        """``e`` supplies precomputed propensity scores and skips the model fit."""
        X, T, Y = _validate(X, T, Y)
        e = self._scores(X, T, e)
        w, kept = iptw_weights(e, T, self.trim)
        self.propensity_, self.weights_, self.kept_ = e, w, kept
        self.n_trimmed_ = int((~kept).sum())
        self.n_treated_ = int((T & kept).sum())
        self.n_control_ = int((~T & kept).sum())
        self.ate_ = ate_iptw(T, Y, w, kept)
        t, c = T & kept, ~T & kept
        self.balance_ = (
            asmd_columns(X[T], X[~T]),
            asmd_columns(X[t], X[c], w[t], w[c]),
        )
        return self


class PropensityScoreMatching(_PropensityMixin, BaseEstimator):
    """1:1 matching with replacement on propensity scores."""

    def __init__(self, propensity="LR", squared=True, C=1.0, n_estimators=100,
                 max_depth=3, learning_rate=0.1):
        self.propensity = propensity
        self.squared = squared
        self.C = C
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.learning_rate = learning_rate

    def fit(self, X, T, Y, e=None):
        X, T, Y = _validate(X, T, Y)
        e = self._scores(X, T, e)
        self.propensity_ = e
        self.match_ = psm_match(e[T], e[~T], squared=self.squared)
        _finish_matching(self, X, T, Y)
        return self


class NearestNeighborMatching(BaseEstimator):
    """1:1 matching with replacement on cosine distance between covariate vectors."""

    def __init__(self, chunk_size=2048):
        self.chunk_size = chunk_size

    def fit(self, X, T, Y):
        X, T, Y = _validate(X, T, Y)
        self.match_ = nnm_match(X[T], X[~T], chunk_size=self.chunk_size)
        _finish_matching(self, X, T, Y)
        return self


class NaiveDifference(BaseEstimator):
    """Unadjusted difference in means; a diagnostic baseline."""

    def fit(self, X, T, Y):
        X, T, Y = _validate(X, T, Y)
        self.ate_ = naive_difference(T, Y)
        self.n_treated_, self.n_control_, self.n_trimmed_ = int(T.sum()), int((~T).sum()), 0
        before = asmd_columns(X[T], X[~T])
        self.balance_ = (before, before.copy())
        return self


def _finish_matching(est, X, T, Y):
    m = est.match_
    Xt, Xc = X[T], X[~T]
    est.ate_ = ate_matched(m, Y[T], Y[~T])
    est.n_treated_ = len(m)
    est.n_control_ = int(len(np.unique(m.control)))
    est.n_trimmed_ = 0
    # matched controls enter with their multiplicity
    est.balance_ = (asmd_columns(Xt, Xc), asmd_columns(Xt[m.treated], Xc[m.control]))


def check_fitted(est):
    check_is_fitted(est, "ate_")
    return est
