"""Acceptance criteria A1-A11, one PASS/FAIL line each in the terminal summary."""

import time

import numpy as np
import pytest
from scipy.special import expit

from cannabis_causal.causal import (
    EstimationSettings,
    IPTWEstimator,
    MatchResult,
    ate_iptw,
    ate_matched,
    cosine_distance,
    iptw_weights,
    naive_difference,
    nnm_match,
    prepare_study,
    run_study,
)
from cannabis_causal.classify import LogisticRegression, SigmoidCalibratedClassifier, fit_gbm, logistic_loss_and_grad
from cannabis_causal.cohort import HORIZONS, load_policy_table
from cannabis_causal.metrics import binary_auc, evaluate_classifier, krippendorff_alpha, macro_f1, observed_agreement
from cannabis_causal.stance import sample_stances, stance_uniforms, tweet_hashes
from cannabis_causal.synth import GeneratorSpec, generate, policy_gradient_fixture
from cannabis_causal.weaklabel import WeakSupervisionClassifier, label_matrix, load_lexicon

from conftest import make_linear_data, run_pipeline, synth_corpus, weak_supervision_fixture

TABLE = load_policy_table()


def _study(spec):
    corpus = generate(spec)
    return corpus, prepare_study(corpus.tweets, spec.treatment_state, spec.legalization_date, TABLE)


@pytest.fixture(scope="module")
def confounded():
    start = time.perf_counter()
    spec = GeneratorSpec(n_users=5000, gamma=1.5, tau={"C1": 0.15}, seed=1)
    corpus, study = _study(spec)
    settings = EstimationSettings(methods=("IPTW-LR", "NAIVE"), groups=("C1",), n_sims=50, master_seed=1)
    result = run_study(study, settings)
    return corpus, result, time.perf_counter() - start


def test_a1_confounded_recovery(confounded, criterion):
    corpus, result, elapsed = confounded
    table = result.ate_table().set_index(["method", "horizon_N"])
    truth = np.array([corpus.truth["ate"]["C1"][str(h)] for h in HORIZONS])
    iptw = np.array([table.loc[("IPTW-LR", h), "ate_mean"] for h in HORIZONS])
    naive = np.array([table.loc[("NAIVE", h), "ate_mean"] for h in HORIZONS])
    err, miss = np.abs(iptw - truth).max(), np.abs(naive - truth).min()
    ok = err <= 0.03 and miss > 0.05 and elapsed <= 300
    criterion("A1", ok, f"max |IPTW-LR - truth| = {err:.4f} (<= 0.03), min naive miss = {miss:.4f} "
                        f"(> 0.05), {elapsed:.0f}s (<= 300s)")
    assert ok


def test_a3_balance(confounded, criterion):
    _, result, _ = confounded
    report = next(r for r in result.balance_reports() if r.method == "IPTW-LR")
    before, after = float(np.median(report.asmd_before)), float(np.median(report.asmd_after))
    ok = before > 0.3 and after < 0.1
    criterion("A3", ok, f"median ASMD {before:.3f} (> 0.3) -> {after:.4f} (< 0.1)")
    assert ok


def test_a2_null_coverage(criterion):
    # no confounding: with it, the Monte-Carlo SE omits the corpus-level error
    covered = 0
    for seed in range(100, 120):
        spec = GeneratorSpec(n_users=5000, gamma=0.0, tau={"C1": 0.0}, seed=seed)
        _, study = _study(spec)
        settings = EstimationSettings(groups=("C1",), horizons=(6,), n_sims=50, master_seed=seed,
                                      ci_mode="standard_error")
        row = run_study(study, settings).ate_table().iloc[0]
        covered += int(row["ci_lo"] <= 0.0 <= row["ci_hi"])
    ok = covered >= 17
    criterion("A2", ok, f"standard-error CI covers 0 in {covered}/20 seeds (>= 17)")
    assert ok


def test_a4_policy_ordering(criterion):
    hits = 0
    for seed in range(200, 220):
        spec = policy_gradient_fixture(GeneratorSpec(n_users=5000, seed=seed))
        _, study = _study(spec)
        settings = EstimationSettings(n_sims=20, master_seed=seed)
        t = run_study(study, settings).ate_table().pivot(index="horizon_N", columns="group", values="ate_mean")
        top = (t["C1"] > t[["C2", "C3", "C4"]].max(axis=1)).all()
        null = (t["C4"].abs() <= 0.03).all()
        hits += int(top and null)
    ok = hits >= 18
    criterion("A4", ok, f"C1 largest and |C4| <= 0.03 at every horizon in {hits}/20 seeds (>= 18)")
    assert ok


def test_a5_oracle_equivalence(criterion):
    agree = 0
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        t, c = rng.normal(size=(50, 10)), rng.normal(size=(200, 10))
        brute = np.array([np.argmin([cosine_distance(a, b) for b in c]) for a in t])
        agree += int(np.array_equal(nnm_match(t, c).control, brute))
    T = np.array([1, 1, 0, 0])
    w, kept = iptw_weights(np.array([0.8, 0.4, 0.5, 0.2]), T)
    iptw_err = abs(ate_iptw(T, np.array([1.0, 0.0, 1.0, 0.0]), w, kept) - (1.25 / 3.75 - 2.0 / 3.25))
    m = MatchResult(np.array([0, 1]), np.array([1, 1]), np.array([0.1, 0.2]), "NNM")
    matched = ate_matched(m, np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    ok = agree == 20 and iptw_err < 1e-12 and matched == -0.5
    criterion("A5", ok, f"NNM {agree}/20 exact, IPTW fixture error {iptw_err:.1e}, matched ATE {matched}")
    assert ok


def test_a6_constant_propensity(criterion):
    rng = np.random.default_rng(6)
    T = rng.integers(0, 2, size=500)
    Y = rng.integers(0, 2, size=(500, 6)).astype(float)
    est = IPTWEstimator().fit(rng.normal(size=(500, 4)), T, Y, e=np.full(500, 0.5))
    err = float(np.abs(est.ate_ - naive_difference(T.astype(bool), Y)).max())
    ok = err < 1e-12
    criterion("A6", ok, f"|IPTW(e=0.5) - naive| = {err:.1e} (< 1e-12)")
    assert ok


def test_a7_numerics(criterion):
    rng = np.random.default_rng(7)
    X, y = make_linear_data(rng, n=80, d=4, k=3)
    Y = np.eye(3)[y]
    params = rng.normal(size=15)
    s = np.ones(len(y))
    _, g = logistic_loss_and_grad(params, X, Y, s, 1.0)
    h = 1e-6
    num = np.array([
        (logistic_loss_and_grad(params + h * e, X, Y, s, 1.0)[0]
         - logistic_loss_and_grad(params - h * e, X, Y, s, 1.0)[0]) / (2 * h)
        for e in np.eye(15)
    ])
    rel = float(np.max(np.abs(g - num) / np.maximum(np.abs(num), 1e-3)))
    Xb, yb = make_linear_data(rng, n=500, d=4)
    loss = np.asarray(fit_gbm(Xb, yb, rounds=100).train_loss_)
    worst = float(np.diff(loss).max())
    ok = rel < 1e-6 and worst <= 0
    criterion("A7", ok, f"LR gradient max rel. error {rel:.1e} (< 1e-6); GBM max loss step {worst:.1e} (<= 0)")
    assert ok


def test_a8_calibration(criterion):
    rng = np.random.default_rng(8)
    X, y = make_linear_data(rng, n=4000, d=4, scale=0.8)
    base = LogisticRegression(class_weight=None).fit(X[:1000], y[:1000])
    base.coef_, base.intercept_ = base.coef_ * 4.0, base.intercept_ * 4.0
    cal = SigmoidCalibratedClassifier(base).fit_holdout(X[1000:2000], y[1000:2000])
    before = evaluate_classifier(y[2000:], base.predict_proba(X[2000:]))["cross_entropy"]
    after = evaluate_classifier(y[2000:], cal.predict_proba(X[2000:]))["cross_entropy"]
    ok = after < before
    criterion("A8", ok, f"held-out cross-entropy {before:.3f} -> {after:.3f}")
    assert ok


def test_a9_weak_supervision(criterion):
    texts, scores, X, y = weak_supervision_fixture(seed=9)
    L = label_matrix(texts, load_lexicon(), scores)
    clf = WeakSupervisionClassifier(n_estimators=50).fit(X, L)
    f1 = macro_f1(y, clf.predict(X))
    ok = f1 >= 0.90
    criterion("A9", ok, f"macro-F1 {f1:.3f} on 200 tweets with 10% noise (>= 0.90)")
    assert ok


def test_a10_metrics(criterion):
    alpha = krippendorff_alpha([["a", "a"], ["a", "b"], ["b", "b"], ["b", "b"]])
    auc = binary_auc([0, 0, 1, 1], [0.1, 0.4, 0.35, 0.8])
    skew = [["a", "a"]] * 98 + [["a", "b"]] * 2
    agree, skew_alpha = observed_agreement(skew), krippendorff_alpha(skew)
    ok = abs(alpha - 8 / 15) < 1e-9 and abs(auc - 0.75) < 1e-9 and agree >= 95 and skew_alpha <= 0
    criterion("A10", ok, f"alpha {alpha:.12f} (8/15), AUC {auc} (0.75), skewed: agreement {agree:.1f}%, "
                         f"alpha {skew_alpha:.4f} (<= 0)")
    assert ok


def test_a11_determinism(tmp_path, criterion):
    corpus_dir = synth_corpus(tmp_path / "synth")
    a = run_pipeline(corpus_dir, tmp_path / "a")
    b = run_pipeline(corpus_dir, tmp_path / "b")
    same = a.name == b.name and all(
        (a / p.name).read_bytes() == (b / p.name).read_bytes() for p in a.iterdir()
    )
    p = np.array([0.55, 0.15, 0.30])
    hashes = tweet_hashes([f"draw{i}" for i in range(30_000)])
    draws = sample_stances(np.tile(p, (30_000, 1)), stance_uniforms(hashes, 11, 0))
    freq = np.array([np.mean(draws == 1), np.mean(draws == -1), np.mean(draws == 0)])
    dev = float(np.abs(freq - p).max())
    ok = same and dev <= 0.01
    criterion("A11", ok, f"reports byte-identical: {same}; max stance frequency deviation {dev:.4f} (<= 0.01)")
    assert ok
