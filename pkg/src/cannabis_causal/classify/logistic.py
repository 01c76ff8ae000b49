"""Class-weighted L2 logistic regression (binary and multinomial)."""

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, log_softmax, softmax
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y


def compute_class_weights(y, classes, class_weight=None):
    """Per-class weights aligned with ``classes``.

    ``"balanced"`` gives class ``c`` the weight ``m / (k * count_c)``.
    ``None`` gives every class weight one, and a mapping is used as-is
    (missing classes default to one).
    """
    classes = np.asarray(classes)
    if class_weight is None or class_weight == "none":
        return np.ones(len(classes))
    if isinstance(class_weight, str):
        if class_weight != "balanced":
            raise ValueError(f"unknown class_weight mode {class_weight!r}")
        counts = np.array([np.sum(y == c) for c in classes], dtype=float)
        if np.any(counts == 0):
            raise ValueError("balanced class weights need every class present")
        return len(y) / (len(classes) * counts)
    return np.array([float(class_weight.get(c, 1.0)) for c in classes])


def _unpack(params, n_outputs, n_features):
    W = params[: n_outputs * n_features].reshape(n_outputs, n_features)
    b = params[n_outputs * n_features:]
    return W, b


def logistic_loss_and_grad(params, X, Y, sample_weight, C):
    """Penalised weighted cross-entropy and its gradient.

    ``Y`` is either a 0/1 vector (binary, one weight row) or a one-hot
    matrix (multinomial). The penalty is ``||W||^2 / (2C)``; intercepts are
    not penalised. The loss is a weighted *sum*, not a mean, so integer
    sample weights behave like row replication.
    """
    n, d = X.shape
    binary = Y.ndim == 1
    k = 1 if binary else Y.shape[1]
    W, b = _unpack(params, k, d)
    Z = X @ W.T + b
    if binary:
        z = Z[:, 0]
        # log(1 + exp(-z)) for y=1, log(1 + exp(z)) for y=0
        loss_rows = np.logaddexp(0.0, -z) * Y + np.logaddexp(0.0, z) * (1 - Y)
        R = (expit(z) - Y)[:, None]
    else:
        logp = log_softmax(Z, axis=1)
        loss_rows = -np.sum(Y * logp, axis=1)
        R = np.exp(logp) - Y
    loss = sample_weight @ loss_rows + 0.5 * np.sum(W * W) / C
    Rw = R * sample_weight[:, None]
    gW = Rw.T @ X + W / C
    gb = Rw.sum(axis=0)
    return loss, np.concatenate([gW.ravel(), gb])


def _gradient_descent(fun, x0, tol, max_iter):
    """Full-batch gradient descent with Armijo backtracking."""
    x = x0.copy()
    f, g = fun(x)
    step = 1.0
    for it in range(max_iter):
        if np.max(np.abs(g)) < tol:
            return x, it, True
        gg = g @ g
        step = min(step * 2.0, 1e6)
        while True:
            x_new = x - step * g
            f_new, g_new = fun(x_new)
            if f_new <= f - 1e-4 * step * gg or step < 1e-20:
                break
            step *= 0.5
        x, f, g = x_new, f_new, g_new
    return x, max_iter, bool(np.max(np.abs(g)) < tol)


class LogisticRegression(BaseEstimator, ClassifierMixin):
    """L2-regularised logistic regression with optional class balancing.

    Parameters
    ----------
    C : float
        Inverse regularisation strength; the penalty is ``||W||^2 / (2C)``.
    class_weight : {"balanced", None} or dict
        Per-class loss multipliers.
    tol : float
        Convergence threshold on the gradient infinity-norm.
    max_iter : int
        Iteration cap for the optimiser.
    solver : {"lbfgs", "gd"}
        ``"lbfgs"`` (quasi-Newton) or plain gradient descent with
        backtracking line search. Both are deterministic.
    """

    def __init__(self, C=1.0, class_weight="balanced", tol=1e-6, max_iter=10_000, solver="lbfgs"):
        self.C = C
        self.class_weight = class_weight
        self.tol = tol
        self.max_iter = max_iter
        self.solver = solver

    def fit(self, X, y, sample_weight=None, init=None):
        X, y = check_X_y(X, y, dtype=np.float64)
        if self.C <= 0:
            raise ValueError("C must be positive")
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise ValueError("logistic regression needs at least two classes in y")
        n, d = X.shape
        self.n_features_in_ = d
        cw = compute_class_weights(y, self.classes_, self.class_weight)
        self.class_weight_ = cw
        y_idx = np.searchsorted(self.classes_, y)
        sw = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=float)
        if sw.shape != (n,) or np.any(sw < 0) or not np.all(np.isfinite(sw)):
            raise ValueError("sample_weight must be a finite non-negative vector of length n")
        s = sw * cw[y_idx]

        if len(self.classes_) == 2:
            Y = y_idx.astype(float)
            k = 1
        else:
            k = len(self.classes_)
            Y = np.zeros((n, k))
            Y[np.arange(n), y_idx] = 1.0
        size = k * d + k
        x0 = np.zeros(size) if init is None else np.asarray(init, dtype=float).ravel()
        if x0.shape != (size,):
            raise ValueError(f"init must have {size} parameters")

        fun = lambda p: logistic_loss_and_grad(p, X, Y, s, self.C)  # noqa: E731
        if self.solver == "lbfgs":
            res = minimize(
                fun, x0, jac=True, method="L-BFGS-B",
                options={"maxiter": self.max_iter, "gtol": self.tol, "ftol": 1e-15, "maxcor": 20},
            )
            params, self.n_iter_ = res.x, res.nit
            self.converged_ = bool(np.max(np.abs(fun(params)[1])) < self.tol)
        elif self.solver == "gd":
            params, self.n_iter_, self.converged_ = _gradient_descent(fun, x0, self.tol, self.max_iter)
        else:
            raise ValueError(f"unknown solver {self.solver!r}")

        W, b = _unpack(params, k, d)
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise FloatingPointError("optimiser produced non-finite parameters")
        self.coef_, self.intercept_ = W, b
        self.loss_ = float(fun(params)[0])
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        Z = X @ self.coef_.T + self.intercept_
        return Z[:, 0] if Z.shape[1] == 1 else Z

    def predict_proba(self, X):
        Z = self.decision_function(X)
        if Z.ndim == 1:
            p = expit(Z)
            return np.column_stack([1.0 - p, p])
        return softmax(Z, axis=1)

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]


def fit_logistic(X, y, class_weights="balanced", C=1.0, sample_weights=None, **kwargs):
    """Fit and return a :class:`LogisticRegression`.

    ``class_weights`` accepts ``"balanced"``, ``"none"``/``None`` or an
    explicit ``{class: weight}`` mapping.
    """
    if class_weights == "none":
        class_weights = None
    init = kwargs.pop("init", None)
    model = LogisticRegression(C=C, class_weight=class_weights, **kwargs)
    return model.fit(X, y, sample_weight=sample_weights, init=init)
