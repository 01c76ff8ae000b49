import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.linear_model import LogisticRegression as SkLogisticRegression

from cannabis_causal.classify import (
    GradientBoostingClassifier,
    LogisticRegression,
    SigmoidCalibratedClassifier,
    calibrate,
    compute_class_weights,
    dump_model,
    fit_gbm,
    fit_logistic,
    load_model,
    logistic_loss_and_grad,
    predict_proba,
)
from cannabis_causal.metrics import evaluate_classifier

from conftest import make_linear_data


def _finite_difference_error(params, X, Y, s, C, h=1e-6):
    _, g = logistic_loss_and_grad(params, X, Y, s, C)
    num = np.empty_like(params)
    for i in range(len(params)):
        e = np.zeros_like(params)
        e[i] = h
        num[i] = (logistic_loss_and_grad(params + e, X, Y, s, C)[0]
                  - logistic_loss_and_grad(params - e, X, Y, s, C)[0]) / (2 * h)
    return np.max(np.abs(g - num) / np.maximum(np.abs(num), 1e-3))


@pytest.mark.parametrize("k", [2, 3])
def test_gradient_matches_finite_differences(rng, k):
    X, y = make_linear_data(rng, n=60, d=4, k=k)
    Y = y.astype(float) if k == 2 else np.eye(k)[y]
    size = (1 if k == 2 else k) * 5
    params = rng.normal(size=size)
    s = rng.uniform(0.5, 2.0, size=len(y))
    assert _finite_difference_error(params, X, Y, s, C=0.7) < 1e-6


def test_balanced_weights_match_formula():
    y = np.array([0] * 90 + [1] * 10)
    w = compute_class_weights(y, np.array([0, 1]), "balanced")
    np.testing.assert_allclose(w, [100 / 180, 100 / 20])


def test_gradient_on_small_random_problem(rng):
    X = rng.normal(size=(5, 3))
    y = np.array([0, 1, 1, 0, 1], dtype=float)
    params = rng.normal(size=4)
    assert _finite_difference_error(params, X, y, np.ones(5), C=1.0, h=1e-5) < 1e-6


@pytest.mark.parametrize("k", [2, 3])
def test_agrees_with_reference_logistic_regression(rng, k):
    # same objective: sum of weighted losses + ||W||^2 / (2C)
    X, y = make_linear_data(rng, n=300, d=4, k=k)
    ours = LogisticRegression(C=0.5, class_weight="balanced", tol=1e-10).fit(X, y)
    ref = SkLogisticRegression(C=0.5, class_weight="balanced", tol=1e-12, max_iter=10_000).fit(X, y)
    np.testing.assert_allclose(ours.predict_proba(X), ref.predict_proba(X), atol=1e-5)


def test_gradient_descent_solver_reaches_same_optimum(rng):
    X, y = make_linear_data(rng, n=200, d=3)
    a = LogisticRegression(C=1.0, tol=1e-8).fit(X, y)
    b = LogisticRegression(C=1.0, tol=1e-6, solver="gd", max_iter=50_000).fit(X, y)
    np.testing.assert_allclose(a.predict_proba(X), b.predict_proba(X), atol=1e-4)


def test_class_weight_equals_replication(rng):
    X, y = make_linear_data(rng, n=120, d=3)
    weighted = LogisticRegression(class_weight={0: 1.0, 1: 3.0}, tol=1e-10).fit(X, y)
    rep = np.concatenate([np.arange(len(y))] + [np.flatnonzero(y == 1)] * 2)
    replicated = LogisticRegression(class_weight=None, tol=1e-10).fit(X[rep], y[rep])
    np.testing.assert_allclose(weighted.coef_, replicated.coef_, atol=1e-5)


def test_logistic_rejects_bad_input(rng):
    X = rng.normal(size=(10, 2))
    with pytest.raises(ValueError):
        LogisticRegression().fit(X, np.zeros(10))
    with pytest.raises(ValueError):
        LogisticRegression(C=0).fit(X, np.arange(10) % 2)
    model = LogisticRegression().fit(X, np.arange(10) % 2)
    with pytest.raises(ValueError):
        model.predict_proba(rng.normal(size=(3, 3)))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.sampled_from([2, 3, 4]))
def test_probabilities_form_distribution(seed, k):
    X, y = make_linear_data(np.random.default_rng(seed), n=80, d=3, k=k)
    if len(np.unique(y)) < 2:
        return
    P = fit_logistic(X, y).predict_proba(X)
    assert np.all(P >= 0)
    np.testing.assert_allclose(P.sum(axis=1), 1.0)


def test_gbm_loss_monotone_over_100_rounds(rng):
    X, y = make_linear_data(rng, n=500, d=4)
    model = fit_gbm(X, y, rounds=100, depth=3, learning_rate=0.1)
    loss = np.asarray(model.train_loss_)
    assert len(loss) == 101
    assert np.all(np.diff(loss) <= 1e-12)


def test_gbm_learns_xor(rng):
    X = rng.uniform(-1, 1, size=(400, 2))
    y = ((X[:, 0] > 0) ^ (X[:, 1] > 0)).astype(int)
    model = fit_gbm(X, y, rounds=50, depth=2, learning_rate=0.3)
    assert np.mean(model.predict(X) == y) > 0.95


def test_gbm_fits_four_point_xor():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([0, 1, 1, 0])
    assert np.all(fit_gbm(X, y, rounds=50, depth=2, learning_rate=0.5).predict(X) == y)
    # no linear boundary gets more than three of the four points right
    lr = LogisticRegression(C=1e6, class_weight=None).fit(X, y)
    assert np.mean(lr.predict(X) == y) <= 0.75


def test_gbm_zero_rounds_is_prior(rng):
    y = np.array([0] * 30 + [1] * 10)
    X = rng.normal(size=(40, 2))
    model = fit_gbm(X, y, rounds=0)
    np.testing.assert_allclose(model.predict_proba(X)[:, 1], 0.25)
    with pytest.raises(ValueError):
        fit_gbm(X, y, rounds=-1)


def _distorted(rng, n, temperature=4.0):
    """A base model whose logits are sharpened by ``temperature`` (overconfident)."""
    X, y = make_linear_data(rng, n=n, d=4, k=2, scale=0.8)
    base = LogisticRegression(class_weight=None).fit(X, y)
    base.coef_ = base.coef_ * temperature
    base.intercept_ = base.intercept_ * temperature
    return base, X, y


def test_calibration_reduces_heldout_cross_entropy(rng):
    base, X, y = _distorted(rng, 3000)
    cal = SigmoidCalibratedClassifier(base).fit_holdout(X[:1500], y[:1500])
    before = evaluate_classifier(y[1500:], base.predict_proba(X[1500:]))["cross_entropy"]
    after = evaluate_classifier(y[1500:], cal.predict_proba(X[1500:]))["cross_entropy"]
    assert after < before


def test_binary_calibration_preserves_ranking(rng):
    base, X, y = _distorted(rng, 600)
    cal = SigmoidCalibratedClassifier(base).fit_holdout(X, y)
    assert cal.scale_[0] > 0
    order = np.argsort(base.predict_proba(X)[:, 1])
    assert np.all(np.diff(cal.predict_proba(X)[order, 1]) >= -1e-12)


def test_multiclass_calibration_rows_sum_to_one(rng):
    X, y = make_linear_data(rng, n=600, d=4, k=3)
    cal = calibrate(LogisticRegression(), X, y, holdout_fraction=0.3, seed=1)
    np.testing.assert_allclose(cal.predict_proba(X).sum(axis=1), 1.0)


def test_calibration_needs_all_classes_in_holdout(rng):
    base, X, y = _distorted(rng, 100)
    with pytest.raises(ValueError):
        SigmoidCalibratedClassifier(base).fit_holdout(X[y == 0], y[y == 0])


@pytest.mark.parametrize("kind", ["logistic", "gbm", "calibrated"])
def test_serialization_round_trip(rng, tmp_path, kind):
    X, y = make_linear_data(rng, n=300, d=3)
    if kind == "logistic":
        model = fit_logistic(X, y)
    elif kind == "gbm":
        model = fit_gbm(X, y, rounds=10)
    else:
        model = calibrate(LogisticRegression(), X, y)
    path = tmp_path / "model.json"
    dump_model(model, path)
    json.loads(path.read_text())
    again = load_model(path)
    np.testing.assert_array_equal(again.predict_proba(X), model.predict_proba(X))


def test_predict_proba_single_row(rng):
    X, y = make_linear_data(rng, n=100, d=3)
    model = fit_logistic(X, y)
    np.testing.assert_allclose(predict_proba(model, X[0]), model.predict_proba(X[:1])[0])
