"""Weak supervision for personal-tweet detection.

Four labeling functions vote Personal / NonPersonal / Abstain, a
two-class label model with independent abstention combines the votes into
soft labels, and a boosted-tree classifier trained on confident soft labels
scores every tweet.
"""

import csv
import logging
import re
import warnings
from enum import IntEnum
from importlib import resources
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .classify import GradientBoostingClassifier, LogisticRegression
from .corpus import CANNABIS, JUUL, URL_RE

logger = logging.getLogger(__name__)


class LfVote(IntEnum):
    ABSTAIN = -1
    NON_PERSONAL = 0
    PERSONAL = 1


ABSTAIN, NON_PERSONAL, PERSONAL = LfVote.ABSTAIN, LfVote.NON_PERSONAL, LfVote.PERSONAL

FIRST_PERSON = frozenset(
    ["i", "me", "my", "mine", "we", "us", "our", "ours", "i'm", "i've", "i'll", "i'd"]
)
SUBJECTIVITY_LOW, SUBJECTIVITY_HIGH = 1, 4
SCORE_HIGH, SCORE_LOW = 0.6, 0.1
PERSONAL_THRESHOLDS = {JUUL: 0.1, CANNABIS: 0.5}

_LF_TOKEN = re.compile(r"[a-z0-9']+")
_STRENGTH = {"weak": 1, "strong": 2}


def lf_tokens(text):
    text = URL_RE.sub(" ", text or "").lower().replace("’", "'")
    return [t.strip("'") if t not in FIRST_PERSON else t for t in _LF_TOKEN.findall(text)]


def load_lexicon(path=None):
    """Read a ``token,strength`` CSV (strength ``weak`` or ``strong``) into ``{token: 1|2}``."""
    if path is None:
        text = resources.files("cannabis_causal.data").joinpath("subjectivity_lexicon.csv").read_text()
    else:
        text = Path(path).read_text()
    lexicon = {}
    for row in csv.DictReader(text.splitlines()):
        strength = row["strength"].strip().lower()
        if strength not in _STRENGTH:
            raise ValueError(f"lexicon strength must be weak or strong, got {strength!r}")
        lexicon[row["token"].strip().lower()] = _STRENGTH[strength]
    if not lexicon:
        raise ValueError("subjectivity lexicon is empty")
    return lexicon


def subjectivity(text, lexicon):
    """Sum of clue strengths (weak=1, strong=2) over whole tokens."""
    return sum(lexicon.get(t, 0) for t in lf_tokens(text))


def lf_url(text):
    return NON_PERSONAL if URL_RE.search(text or "") else PERSONAL


def lf_first_person(text):
    return PERSONAL if FIRST_PERSON.intersection(lf_tokens(text)) else ABSTAIN


def lf_subjectivity(text, lexicon):
    score = subjectivity(text, lexicon)
    if score < SUBJECTIVITY_LOW:
        return NON_PERSONAL
    if score > SUBJECTIVITY_HIGH:
        return PERSONAL
    return ABSTAIN


def lf_external_score(score):
    if score is None or (isinstance(score, float) and np.isnan(score)):
        return ABSTAIN
    if score > SCORE_HIGH:
        return PERSONAL
    if score < SCORE_LOW:
        return NON_PERSONAL
    return ABSTAIN


def apply_labeling_functions(text, lexicon, external_score=None):
    """The four votes for one tweet, in LF order (URL, pronoun, subjectivity, score)."""
    return (
        lf_url(text),
        lf_first_person(text),
        lf_subjectivity(text, lexicon),
        lf_external_score(external_score),
    )


def label_matrix(texts, lexicon, external_scores=None):
    """``m x 4`` integer vote matrix (-1 abstain, 0 non-personal, 1 personal)."""
    if external_scores is None:
        external_scores = [None] * len(texts)
    return np.array(
        [apply_labeling_functions(t, lexicon, s) for t, s in zip(texts, external_scores)], dtype=np.int64
    ).reshape(len(texts), 4)


def load_external_scores(path):
    """``tweet_id,score`` CSV into a dict."""
    with open(path, newline="") as fh:
        return {row["tweet_id"]: float(row["score"]) for row in csv.DictReader(fh)}


def fallback_scores(X, votes):
    """Stand-in for the external personal-experience score.

    Trains a balanced logistic regression on tweets where the URL and
    pronoun functions agree on Personal versus tweets with a URL and no
    pronoun. Returns ``None`` when either side is empty.
    """
    pos = (votes[:, 0] == PERSONAL) & (votes[:, 1] == PERSONAL)
    neg = (votes[:, 0] == NON_PERSONAL) & (votes[:, 1] == ABSTAIN)
    if not pos.any() or not neg.any():
        return None
    rows = pos | neg
    model = LogisticRegression(C=1.0, class_weight="balanced").fit(X[rows], pos[rows].astype(int))
    return model.predict_proba(X)[:, 1]


class LabelModel(BaseEstimator):
    """Two-class label model with conditionally independent labeling functions.

    Each function abstains with its own rate and, when it votes, is right
    with probability ``accuracy_[j]`` regardless of the true class. Fitted
    by EM.

    Attributes
    ----------
    accuracy_ : ndarray of shape (n_lfs,)
    prior_ : ndarray ``[P(NonPersonal), P(Personal)]``
    abstain_rate_ : ndarray of shape (n_lfs,)
    log_likelihood_ : list of per-iteration log-likelihoods
    flagged_ : indices of functions that never voted (accuracy left at init)
    """

    def __init__(self, init_accuracy=0.7, max_iter=100, tol=1e-8, min_rows=50):
        self.init_accuracy = init_accuracy
        self.max_iter = max_iter
        self.tol = tol
        self.min_rows = min_rows

    @staticmethod
    def _check_votes(L):
        L = check_array(L, dtype=np.int64)
        if not np.isin(L, (-1, 0, 1)).all():
            raise ValueError("votes must be -1 (abstain), 0 or 1")
        return L

    def _row_terms(self, L, accuracy, prior):
        voted = L != ABSTAIN
        log_a, log_na = np.log(accuracy), np.log1p(-accuracy)
        # log P(votes | y) without abstention terms, which do not depend on y
        ll_pos = np.where(voted & (L == PERSONAL), log_a, 0.0).sum(1) + np.where(voted & (L == NON_PERSONAL), log_na, 0.0).sum(1)
        ll_neg = np.where(voted & (L == NON_PERSONAL), log_a, 0.0).sum(1) + np.where(voted & (L == PERSONAL), log_na, 0.0).sum(1)
        return np.log(prior[1]) + ll_pos, np.log(prior[0]) + ll_neg

    def _log_likelihood(self, L, accuracy, prior):
        a, b = self._row_terms(L, accuracy, prior)
        beta = self.abstain_rate_
        abstain = L == ABSTAIN
        with np.errstate(divide="ignore"):
            abst_terms = np.where(abstain, np.log(beta), np.log1p(-beta)).sum()
        return float(np.logaddexp(a, b).sum() + abst_terms)

    def fit(self, L, y=None):
        L = self._check_votes(L)
        m, k = L.shape
        if m < self.min_rows:
            warnings.warn(f"label model fitted on only {m} rows (< {self.min_rows})", stacklevel=2)
        voted = L != ABSTAIN
        if not voted.any():
            raise ValueError("no signal: every labeling function abstained on every row")
        self.n_features_in_ = k
        self.abstain_rate_ = 1.0 - voted.mean(axis=0)
        self.flagged_ = np.flatnonzero(~voted.any(axis=0))
        for j in self.flagged_:
            logger.warning("labeling function %d never votes; accuracy left at %.2f", j, self.init_accuracy)

        n_pos, n_neg = (L == PERSONAL).sum(1), (L == NON_PERSONAL).sum(1)
        decided = n_pos != n_neg
        p0 = np.mean(n_pos[decided] > n_neg[decided]) if decided.any() else 0.5
        prior = np.clip(np.array([1.0 - p0, p0]), 0.01, 0.99)
        accuracy = np.full(k, float(self.init_accuracy))

        history = [self._log_likelihood(L, accuracy, prior)]
        eps = 1e-6
        for _ in range(self.max_iter):
            a, b = self._row_terms(L, accuracy, prior)
            q = np.exp(a - np.logaddexp(a, b))
            agree = np.where(L == PERSONAL, q[:, None], np.where(L == NON_PERSONAL, 1.0 - q[:, None], 0.0))
            n_votes = voted.sum(axis=0)
            new_acc = accuracy.copy()
            has = n_votes > 0
            new_acc[has] = agree.sum(axis=0)[has] / n_votes[has]
            accuracy = np.clip(new_acc, eps, 1 - eps)
            prior = np.clip(np.array([1.0 - q.mean(), q.mean()]), eps, 1 - eps)
            history.append(self._log_likelihood(L, accuracy, prior))
            if abs(history[-1] - history[-2]) < self.tol:
                break
        self.accuracy_, self.prior_ = accuracy, prior
        self.log_likelihood_ = history
        return self

    def predict_proba(self, L):
        check_is_fitted(self, "accuracy_")
        L = self._check_votes(L)
        a, b = self._row_terms(L, self.accuracy_, self.prior_)
        p = np.exp(a - np.logaddexp(a, b))
        return np.column_stack([1.0 - p, p])

    def predict(self, L):
        return (self.predict_proba(L)[:, 1] >= 0.5).astype(int)


def fit_label_model(votes, **kwargs):
    return LabelModel(**kwargs).fit(votes)


def infer_weak_labels(votes, model):
    """Posterior probability of Personal for each row."""
    return model.predict_proba(votes)[:, 1]


def select_weighted_training(labels, threshold=0.8, k=20_000, seed=0):
    """Uniformly sample up to ``k`` rows whose confidence ``max(p, 1-p)`` exceeds ``threshold``.

    Returns ``(indices, hard_labels, weights)`` with weights equal to the
    confidence. Indices are sorted.
    """
    p = np.asarray(labels, dtype=float)
    confidence = np.maximum(p, 1.0 - p)
    eligible = np.flatnonzero(confidence > threshold)
    if len(eligible) == 0:
        raise ValueError(f"no rows with label confidence above {threshold}")
    rng = np.random.default_rng(seed)
    n = min(k, len(eligible))
    idx = np.sort(rng.choice(eligible, size=n, replace=False))
    return idx, (p[idx] >= 0.5).astype(int), confidence[idx]


def _unit_rows(A):
    A = np.asarray(A, dtype=float)
    norms = np.linalg.norm(A, axis=1, keepdims=True)
    return np.divide(A, norms, out=np.zeros_like(A), where=norms > 0)


def domain_select(source, target, k, chunk=4096):
    """Indices of the ``k`` source rows most cosine-similar to any target row.

    Ranking is by each source row's maximum similarity over the target set;
    ties go to the lower index.
    """
    S, T = _unit_rows(source), _unit_rows(target)
    if S.shape[1] != T.shape[1]:
        raise ValueError("source and target embeddings differ in dimension")
    if k > len(S):
        warnings.warn(f"k={k} exceeds {len(S)} source rows; returning all", stacklevel=2)
        k = len(S)
    best = np.empty(len(S))
    for start in range(0, len(S), chunk):
        best[start:start + chunk] = (S[start:start + chunk] @ T.T).max(axis=1)
    order = np.argsort(-best, kind="stable")
    return order[:k]


class WeakSupervisionClassifier(BaseEstimator, ClassifierMixin):
    """Label model + confident-sample selection + weighted boosted trees.

    ``fit(X, votes)`` takes embedding features and the LF vote matrix;
    ``predict_proba(X)`` needs only features.
    """

    def __init__(self, confidence_threshold=0.8, n_samples=20_000, n_estimators=100,
                 max_depth=3, learning_rate=0.1, random_state=0):
        self.confidence_threshold = confidence_threshold
        self.n_samples = n_samples
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.random_state = random_state

    def fit(self, X, votes):
        X = check_array(X, dtype=np.float64)
        self.label_model_ = LabelModel().fit(votes)
        self.weak_labels_ = infer_weak_labels(votes, self.label_model_)
        idx, y, w = select_weighted_training(
            self.weak_labels_, self.confidence_threshold, self.n_samples, self.random_state
        )
        if len(np.unique(y)) < 2:
            raise ValueError("confident weak labels cover only one class")
        self.training_index_ = idx
        self.estimator_ = GradientBoostingClassifier(
            n_estimators=self.n_estimators, max_depth=self.max_depth, learning_rate=self.learning_rate
        ).fit(X[idx], y, sample_weight=w)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "estimator_")
        return self.estimator_.predict_proba(X)

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)


def retain_majority_personal(user_ids, is_personal):
    """User ids whose tweets are strictly more than half personal."""
    user_ids = np.asarray(user_ids)
    uniques, inverse = np.unique(user_ids, return_inverse=True)
    personal = np.bincount(inverse, weights=np.asarray(is_personal, dtype=float), minlength=len(uniques))
    total = np.bincount(inverse, minlength=len(uniques))
    return set(uniques[2 * personal > total].tolist())


def classify_personal(model, X, datasets, user_ids=None, thresholds=None):
    """Score tweets, mark personal ones and find majority-personal users.

    A tweet is personal iff its score is at least its dataset's threshold.
    Returns ``(p_personal, is_personal, retained_users)``; the last is
    ``None`` when ``user_ids`` is not given.
    """
    check_is_fitted(model)
    thresholds = {**PERSONAL_THRESHOLDS, **(thresholds or {})}
    p = model.predict_proba(np.asarray(X, dtype=float))[:, 1]
    cut = np.array([thresholds[d] for d in datasets], dtype=float)
    is_personal = p >= cut
    retained = None if user_ids is None else retain_majority_personal(user_ids, is_personal)
    return p, is_personal, retained
