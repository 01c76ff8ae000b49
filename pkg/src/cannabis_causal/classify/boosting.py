"""Gradient boosting on the logistic loss with depth-limited regression trees."""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y


@dataclass
class RegressionTree:
    """Array-encoded binary tree; ``feature == -1`` marks a leaf."""

    feature: list = field(default_factory=list)
    threshold: list = field(default_factory=list)
    left: list = field(default_factory=list)
    right: list = field(default_factory=list)
    value: list = field(default_factory=list)

    def _add(self):
        for arr in (self.feature, self.left, self.right):
            arr.append(-1)
        self.threshold.append(0.0)
        self.value.append(0.0)
        return len(self.feature) - 1

    def predict(self, X):
        feature = np.asarray(self.feature)
        threshold = np.asarray(self.threshold)
        left, right = np.asarray(self.left), np.asarray(self.right)
        node = np.zeros(len(X), dtype=np.intp)
        rows = np.arange(len(X))
        while True:
            f = feature[node]
            active = f >= 0
            if not active.any():
                break
            go_left = X[rows[active], f[active]] <= threshold[node[active]]
            node[active] = np.where(go_left, left[node[active]], right[node[active]])
        return np.asarray(self.value)[node]

    def to_dict(self):
        return {k: list(getattr(self, k)) for k in ("feature", "threshold", "left", "right", "value")}


def bin_features(X, max_bins=255):
    """Quantise each column to at most ``max_bins`` ordered codes.

    Columns with few distinct values keep one bin per value, so splits on
    them are exact. Returns ``(codes, thresholds)`` where ``thresholds[j][b]``
    separates bin ``b`` from bin ``b + 1`` of column ``j``.
    """
    n, d = X.shape
    codes = np.empty((n, d), dtype=np.intp)
    thresholds = []
    for j in range(d):
        values = np.unique(X[:, j])
        if len(values) <= max_bins:
            cuts = 0.5 * (values[:-1] + values[1:])
        else:
            qs = np.quantile(X[:, j], np.linspace(0, 1, max_bins + 1)[1:-1])
            cuts = np.unique(qs)
        codes[:, j] = np.searchsorted(cuts, X[:, j], side="left")
        thresholds.append(cuts)
    return codes, thresholds


def _best_split(codes, thresholds, rows, wr, w, n_bins, min_child_weight):
    """Weighted-SSE split search over histogram bins of the node ``rows``.

    Returns ``(gain, feature, threshold)`` or ``None`` if nothing separates.
    Ties go to the lowest feature index, then the lowest threshold.
    """
    d = codes.shape[1]
    keys = (codes[rows] + np.arange(d) * n_bins).ravel()
    S_hist = np.bincount(keys, weights=np.repeat(wr[rows], d), minlength=d * n_bins).reshape(d, n_bins)
    W_hist = np.bincount(keys, weights=np.repeat(w[rows], d), minlength=d * n_bins).reshape(d, n_bins)
    C_hist = np.bincount(keys, minlength=d * n_bins).reshape(d, n_bins)
    SL = np.cumsum(S_hist, axis=1)[:, :-1]
    WL = np.cumsum(W_hist, axis=1)[:, :-1]
    CL = np.cumsum(C_hist, axis=1)[:, :-1]
    S, W, count = S_hist[0].sum(), W_hist[0].sum(), len(rows)
    SR, WR = S - SL, W - WL
    n_cuts = np.array([len(t) for t in thresholds])
    valid = (
        (CL > 0) & (CL < count) & (np.arange(n_bins - 1) < n_cuts[:, None])
        & (WL >= min_child_weight) & (WR >= min_child_weight)
    )
    if not valid.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = SL**2 / WL + SR**2 / WR - S**2 / W
    gain = np.where(valid, gain, -np.inf)
    j, b = divmod(int(np.argmax(gain)), n_bins - 1)
    return float(gain[j, b]), j, b


def fit_regression_tree(codes, thresholds, residual, hessian, w, max_depth, n_bins, min_child_weight=1e-12):
    """Grow a tree on ``residual`` (negative gradient) over binned features.

    Splits minimise weighted squared error of the residuals; leaf values are
    one Newton step ``sum(w r) / sum(w h)``.
    """
    tree = RegressionTree()
    wr = w * residual
    stack = [(tree._add(), np.arange(len(residual)), 0)]
    while stack:
        node, rows, depth = stack.pop()
        denom = np.sum(w[rows] * hessian[rows])
        tree.value[node] = float(np.sum(wr[rows]) / denom) if denom > 0 else 0.0
        if depth >= max_depth or len(rows) < 2:
            continue
        r_node = residual[rows]
        if np.all(r_node == r_node[0]):
            continue
        split = _best_split(codes, thresholds, rows, wr, w, n_bins, min_child_weight)
        if split is None:
            continue
        _, j, b = split
        go_left = codes[rows, j] <= b
        tree.feature[node], tree.threshold[node] = j, float(thresholds[j][b])
        lnode, rnode = tree._add(), tree._add()
        tree.left[node], tree.right[node] = lnode, rnode
        stack.append((rnode, rows[~go_left], depth + 1))
        stack.append((lnode, rows[go_left], depth + 1))
    return tree


def _log_loss(y, f, w):
    return float(w @ (np.logaddexp(0.0, f) - y * f) / w.sum())


class GradientBoostingClassifier(BaseEstimator, ClassifierMixin):
    """Binary gradient-boosted trees on the logistic loss.

    ``train_loss_[t]`` is the weighted mean training log-loss after ``t``
    rounds (``train_loss_[0]`` is the constant prior model).
    """

    def __init__(self, n_estimators=100, max_depth=3, learning_rate=0.1, class_weight=None, max_bins=255):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.class_weight = class_weight
        self.max_bins = max_bins

    def fit(self, X, y, sample_weight=None):
        from .logistic import compute_class_weights

        if self.n_estimators < 0:
            raise ValueError("n_estimators (rounds) must be >= 0")
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_ = np.unique(y)
        if len(self.classes_) != 2:
            raise ValueError("gradient boosting here is binary; y must contain exactly two classes")
        self.n_features_in_ = X.shape[1]
        yb = (y == self.classes_[1]).astype(float)
        w = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=float)
        w = w * compute_class_weights(y, self.classes_, self.class_weight)[yb.astype(int)]
        p1 = np.clip(w @ yb / w.sum(), 1e-12, 1 - 1e-12)
        self.init_ = float(np.log(p1 / (1 - p1)))

        codes, thresholds = bin_features(X, self.max_bins)
        n_bins = max(2, max(len(t) for t in thresholds) + 1)
        f = np.full(len(y), self.init_)
        self.estimators_ = []
        self.train_loss_ = [_log_loss(yb, f, w)]
        for _ in range(self.n_estimators):
            p = expit(f)
            tree = fit_regression_tree(codes, thresholds, yb - p, p * (1 - p), w, self.max_depth, n_bins)
            f = f + self.learning_rate * tree.predict(X)
            self.estimators_.append(tree)
            self.train_loss_.append(_log_loss(yb, f, w))
        return self

    def decision_function(self, X):
        check_is_fitted(self, "estimators_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        f = np.full(len(X), self.init_)
        for tree in self.estimators_:
            f += self.learning_rate * tree.predict(X)
        return f

    def predict_proba(self, X):
        p = expit(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return self.classes_[(self.decision_function(X) > 0).astype(int)]


def fit_gbm(X, y, rounds=100, depth=3, learning_rate=0.1, sample_weights=None, class_weight=None):
    """Fit and return a :class:`GradientBoostingClassifier`."""
    model = GradientBoostingClassifier(
        n_estimators=rounds, max_depth=depth, learning_rate=learning_rate, class_weight=class_weight
    )
    return model.fit(X, y, sample_weight=sample_weights)
