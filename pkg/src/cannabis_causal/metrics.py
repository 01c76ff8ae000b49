"""Classifier evaluation and inter-annotator agreement."""

import logging
from itertools import combinations

import numpy as np
import pandas as pd
from scipy.stats import rankdata

logger = logging.getLogger(__name__)

LOG_LOSS_CLIP = 1e-15


def confusion_matrix(y_true, y_pred, labels):
    """k x k counts; rows are true labels, columns predictions."""
    index = {c: i for i, c in enumerate(labels)}
    cm = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        cm[index[t], index[p]] += 1
    return cm


def macro_f1(y_true, y_pred, labels=None):
    labels = np.unique(np.concatenate([y_true, y_pred])) if labels is None else labels
    cm = confusion_matrix(y_true, y_pred, labels)
    tp = np.diag(cm).astype(float)
    denom = cm.sum(axis=0) + cm.sum(axis=1)
    f1 = np.divide(2 * tp, denom, out=np.zeros_like(tp), where=denom > 0)
    return float(f1.mean())


def binary_auc(y, score):
    """Area under the ROC curve via the rank-sum statistic (ties count half)."""
    y = np.asarray(y, dtype=bool)
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both positive and negative examples")
    ranks = rankdata(score)
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def _as_proba_matrix(y_prob, n_classes):
    y_prob = np.asarray(y_prob, dtype=float)
    if y_prob.ndim == 1:
        if n_classes != 2:
            raise ValueError("1-D probabilities are only meaningful for binary labels")
        y_prob = np.column_stack([1 - y_prob, y_prob])
    return y_prob


def evaluate_classifier(y_true, y_prob, classes=None):
    """Macro-F1, prevalence-weighted and micro AUC, and mean cross-entropy.

    ``classes`` gives the column order of ``y_prob``; by default the sorted
    unique labels of ``y_true``. Classes absent from ``y_true`` are skipped
    for the weighted AUC with a warning.
    """
    y_true = np.asarray(y_true)
    classes = np.unique(y_true) if classes is None else np.asarray(classes)
    if len(np.unique(y_true)) < 2:
        raise ValueError("evaluation needs at least two classes in y_true")
    P = _as_proba_matrix(y_prob, len(classes))
    if P.shape[1] != len(classes):
        raise ValueError(f"y_prob has {P.shape[1]} columns for {len(classes)} classes")
    onehot = y_true[:, None] == classes[None, :]
    if not onehot.any(axis=1).all():
        raise ValueError("y_true contains labels outside `classes`")

    pred = classes[np.argmax(P, axis=1)]
    f1 = macro_f1(y_true, pred, classes)

    aucs, weights = [], []
    for k, c in enumerate(classes):
        n_c = int(onehot[:, k].sum())
        if n_c == 0 or n_c == len(y_true):
            logger.warning("class %r absent from y_true (or the only class); skipped for AUC", c)
            continue
        aucs.append(binary_auc(onehot[:, k], P[:, k]))
        weights.append(n_c)
    weighted_auc = float(np.average(aucs, weights=weights)) if aucs else float("nan")
    micro_auc = binary_auc(onehot.ravel(), P.ravel())

    p_true = np.clip(P[onehot], LOG_LOSS_CLIP, 1.0)
    cross_entropy = float(-np.mean(np.log(p_true)))
    return {
        "macro_f1": f1,
        "weighted_auc": weighted_auc,
        "micro_auc": micro_auc,
        "cross_entropy": cross_entropy,
    }


def _units(annotations):
    """Normalise to a list of per-unit value lists with missing entries dropped."""
    if isinstance(annotations, pd.DataFrame):
        annotations = annotations.to_numpy(dtype=object)
    units = []
    for row in annotations:
        units.append([v for v in row if v is not None and not (isinstance(v, float) and np.isnan(v))])
    return units


def coincidence_matrix(annotations):
    """Nominal coincidence matrix and its value labels."""
    units = [u for u in _units(annotations) if len(u) >= 2]
    values = sorted({v for u in units for v in u}, key=str)
    index = {v: i for i, v in enumerate(values)}
    o = np.zeros((len(values), len(values)))
    for u in units:
        m = len(u)
        for a, b in ((a, b) for i, a in enumerate(u) for j, b in enumerate(u) if i != j):
            o[index[a], index[b]] += 1.0 / (m - 1)
    return o, values


def krippendorff_alpha(annotations, level="nominal"):
    """Krippendorff's alpha for nominal data.

    ``annotations`` is units x annotators (array, list of lists or
    DataFrame); ``None``/NaN marks a missing rating.
    """
    if level != "nominal":
        raise ValueError("only nominal alpha is supported")
    o, _ = coincidence_matrix(annotations)
    n = o.sum()
    if n == 0:
        raise ValueError("no unit has two or more ratings; alpha is undefined")
    n_c = o.sum(axis=1)
    disagree_obs = o.sum() - np.trace(o)
    if disagree_obs == 0:
        return 1.0
    disagree_exp = (n_c.sum() ** 2 - np.sum(n_c**2)) / (n - 1)
    return float(1.0 - disagree_obs / disagree_exp)


def observed_agreement(annotations):
    """Mean over units of the fraction of agreeing rater pairs, in percent."""
    fractions = []
    for u in _units(annotations):
        if len(u) < 2:
            continue
        pairs = list(combinations(u, 2))
        fractions.append(sum(a == b for a, b in pairs) / len(pairs))
    if not fractions:
        raise ValueError("no unit has two or more ratings")
    return 100.0 * float(np.mean(fractions))


def load_annotations(path):
    """Read ``unit_id, annotator_id, label`` rows into a units x annotators frame."""
    df = pd.read_csv(path, dtype=str)
    missing = {"unit_id", "annotator_id", "label"} - set(df.columns)
    if missing:
        raise ValueError(f"annotation file lacks columns {sorted(missing)}")
    wide = df.pivot(index="unit_id", columns="annotator_id", values="label")
    return wide.astype(object).where(wide.notna(), None)
