import numpy as np
import pytest

from cannabis_causal.metrics import macro_f1
from cannabis_causal.weaklabel import (
    ABSTAIN,
    NON_PERSONAL,
    PERSONAL,
    LabelModel,
    WeakSupervisionClassifier,
    apply_labeling_functions,
    classify_personal,
    domain_select,
    label_matrix,
    lf_external_score,
    lf_first_person,
    lf_subjectivity,
    lf_url,
    load_lexicon,
    retain_majority_personal,
    select_weighted_training,
    subjectivity,
)

from conftest import weak_supervision_fixture


@pytest.fixture(scope="module")
def lexicon():
    return load_lexicon()


def test_labeling_functions(lexicon):
    assert lf_url("see https://a.b/c") == NON_PERSONAL
    assert lf_url("no link here") == PERSONAL
    assert lf_first_person("I'm done") == PERSONAL
    assert lf_first_person("they left") == ABSTAIN
    assert lf_external_score(0.7) == PERSONAL
    assert lf_external_score(0.05) == NON_PERSONAL
    assert lf_external_score(0.3) == ABSTAIN
    assert lf_external_score(None) == ABSTAIN
    assert lf_external_score(float("nan")) == ABSTAIN


def test_subjectivity_thresholds(lexicon):
    assert subjectivity("amazing awesome", lexicon) == 4
    assert lf_subjectivity("the report", lexicon) == NON_PERSONAL
    assert lf_subjectivity("amazing awesome", lexicon) == ABSTAIN
    assert lf_subjectivity("amazing awesome awful", lexicon) == PERSONAL


def test_label_matrix_shape(lexicon):
    L = label_matrix(["i love it", "news https://x.y"], lexicon, [0.9, None])
    assert L.shape == (2, 4)
    assert tuple(L[1]) == apply_labeling_functions("news https://x.y", lexicon)


def _log_likelihood(L, a, p):
    """Log-likelihood of the vote rows (abstentions dropped) on a parameter grid."""
    total = 0.0
    for row in L:
        lp, ln = np.log(p), np.log1p(-p)
        for j, v in enumerate(row):
            if v == PERSONAL:
                lp, ln = lp + np.log(a[..., j]), ln + np.log1p(-a[..., j])
            elif v == NON_PERSONAL:
                lp, ln = lp + np.log1p(-a[..., j]), ln + np.log(a[..., j])
        total = total + np.logaddexp(lp, ln)
    return total


def _grid_mle(L, eps=1e-6, n=41, rounds=6):
    """Coarse-to-fine grid maximisation over (acc1, acc2, prior)."""
    lo, hi = np.array([0.5, 0.5, eps]), np.full(3, 1 - eps)
    for _ in range(rounds):
        A1, A2, P = np.meshgrid(*[np.linspace(a, b, n) for a, b in zip(lo, hi)], indexing="ij")
        ll = _log_likelihood(L, np.stack([A1, A2], -1), P)
        i = np.unravel_index(np.argmax(ll), ll.shape)
        best = np.array([A1[i], A2[i], P[i]])
        step = (hi - lo) / (n - 1)
        lo = np.maximum(best - 2 * step, [0.5, 0.5, eps])
        hi = np.minimum(best + 2 * step, 1 - eps)
    return best


@pytest.mark.parametrize("rows", [
    [[1, 1], [1, 0], [0, 0], [1, -1]],
    [[1, 1], [0, 1], [0, 0], [1, -1]],
])
def test_em_matches_grid_search(rows):
    L = np.array(rows)
    model = LabelModel(min_rows=1, max_iter=5000, tol=1e-15).fit(L)
    best = _grid_mle(L)
    np.testing.assert_allclose(model.accuracy_, best[:2], atol=1e-3)
    assert model.prior_[1] == pytest.approx(best[2], abs=1e-3)


def test_em_likelihood_non_decreasing(rng):
    L = rng.choice([-1, 0, 1], size=(300, 4))
    model = LabelModel().fit(L)
    assert np.all(np.diff(model.log_likelihood_) >= -1e-9)


def test_posterior_matches_bayes():
    model = LabelModel(min_rows=1).fit(np.array([[1, 1, 0], [0, 0, 0], [1, -1, 1], [0, 1, -1]]))
    a, pr = model.accuracy_, model.prior_
    L = np.array([[1, 0, -1], [-1, -1, -1]])
    pos = pr[1] * a[0] * (1 - a[1])
    neg = pr[0] * (1 - a[0]) * a[1]
    post = model.predict_proba(L)[:, 1]
    assert post[0] == pytest.approx(pos / (pos + neg), abs=1e-12)
    assert post[1] == pytest.approx(pr[1], abs=1e-12)


def test_label_model_edge_cases():
    with pytest.raises(ValueError):
        LabelModel(min_rows=1).fit(np.full((5, 3), -1))
    with pytest.warns(UserWarning):
        model = LabelModel().fit(np.array([[1, -1], [0, -1], [1, -1]]))
    assert list(model.flagged_) == [1]


def test_select_weighted_training():
    p = np.array([0.95, 0.5, 0.1, 0.85, 0.79, 0.05])
    idx, y, w = select_weighted_training(p, threshold=0.8, k=10)
    np.testing.assert_array_equal(idx, [0, 2, 3, 5])
    np.testing.assert_array_equal(y, [1, 0, 1, 0])
    np.testing.assert_allclose(w, [0.95, 0.9, 0.85, 0.95])
    idx2, _, _ = select_weighted_training(p, threshold=0.8, k=2, seed=3)
    assert len(idx2) == 2 and set(idx2) <= set(idx)
    with pytest.raises(ValueError):
        select_weighted_training([0.5, 0.6], threshold=0.8)


def test_domain_select():
    source = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [-1.0, 0.0]])
    target = np.array([[1.0, 0.1]])
    np.testing.assert_array_equal(domain_select(source, target, 2), [0, 2])
    with pytest.warns(UserWarning):
        assert len(domain_select(source, target, 9)) == 4


def test_majority_rule():
    users = ["a", "a", "b", "b", "b", "c"]
    personal = [1, 0, 1, 1, 0, 1]
    assert retain_majority_personal(users, personal) == {"b", "c"}


def test_weak_supervision_pipeline(lexicon):
    texts, scores, X, y = weak_supervision_fixture(seed=0)
    L = label_matrix(texts, lexicon, scores)
    clf = WeakSupervisionClassifier(n_estimators=50).fit(X, L)
    assert macro_f1(y, clf.predict(X)) >= 0.9
    p, is_personal, users = classify_personal(
        clf, X, ["CANNABIS"] * len(y), user_ids=[f"u{i % 20}" for i in range(len(y))]
    )
    np.testing.assert_array_equal(is_personal, p >= 0.5)
    assert isinstance(users, set)


def _fixed_model(acc, prior=0.5):
    model = LabelModel()
    model.accuracy_ = np.asarray(acc, dtype=float)
    model.prior_ = np.array([1 - prior, prior])
    return model


def test_posterior_unanimous_and_symmetric():
    strong = _fixed_model([0.9] * 4).predict_proba(np.array([[1, 1, 1, 1]]))[0, 1]
    assert strong > 0.99
    tie = _fixed_model([0.8] * 4).predict_proba(np.array([[1, 1, 0, 0]]))[0, 1]
    assert tie == pytest.approx(0.5, abs=1e-15)


def test_lf_examples(lexicon):
    assert lf_url("check this deal https://x.co") == NON_PERSONAL
    votes = apply_labeling_functions("i just hit my juul", lexicon, 0.7)
    assert votes[0] == PERSONAL and votes[1] == PERSONAL and votes[3] == PERSONAL


def test_three_of_five_personal_is_retained():
    assert retain_majority_personal(["u"] * 5, [1, 1, 1, 0, 0]) == {"u"}


def test_domain_select_matches_exhaustive(rng):
    source, target = rng.normal(size=(20, 4)), rng.normal(size=(5, 4))
    cos = lambda a, b: a @ b / np.linalg.norm(a) / np.linalg.norm(b)  # noqa: E731
    score = np.array([max(cos(s, t) for t in target) for s in source])
    expected = sorted(range(20), key=lambda i: (-score[i], i))[:7]
    np.testing.assert_array_equal(domain_select(source, target, 7, chunk=3), expected)
