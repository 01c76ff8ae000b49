"""Tweet stance prediction, Monte-Carlo stance sampling and user polarity."""

import hashlib
from dataclasses import dataclass
from enum import IntEnum

import numpy as np
import pandas as pd
from sklearn.utils.validation import check_is_fitted

from .classify import LogisticRegression, SigmoidCalibratedClassifier


class StanceLabel(IntEnum):
    """Stance with its polarity score as the value."""

    IN_FAVOR = 1
    NEITHER = 0
    AGAINST = -1


# column order of every p_s vector / matrix
STANCE_ORDER = (StanceLabel.IN_FAVOR, StanceLabel.AGAINST, StanceLabel.NEITHER)
STANCE_NAMES = ("favor", "against", "neither")
_POLARITY = np.array([int(s) for s in STANCE_ORDER])
_NAME_ALIASES = {"favor": 0, "infavor": 0, "in favor": 0, "against": 1, "neither": 2, "neutral": 2}


def stance_index(label):
    """Column index of a textual stance label (``favor``, ``against``, ``neither``/``neutral``)."""
    try:
        return _NAME_ALIASES[str(label).strip().lower()]
    except KeyError:
        raise ValueError(f"unknown stance label {label!r}") from None


@dataclass(frozen=True)
class UserStance:
    polarity_sum: float
    verdict: str
    flagged: bool = False


def verdict_of(total):
    return "Pro" if total > 0 else ("Anti" if total < 0 else "Neutral")


# --- training / prediction ------------------------------------------------------

def train_stance_model(X, labels, C=1.0, holdout_fraction=0.2, seed=0):
    """Balanced-class-weight multinomial logistic regression with holdout calibration.

    ``labels`` are stance names; the model's classes are the column indices
    of ``STANCE_ORDER``.
    """
    y = np.array([stance_index(label) for label in labels])
    base = LogisticRegression(C=C, class_weight="balanced")
    return SigmoidCalibratedClassifier(base, holdout_fraction=holdout_fraction, random_state=seed).fit(X, y)


def predict_stance(X, model):
    """``n x 3`` stance probabilities in ``STANCE_ORDER``; rows sum to one."""
    check_is_fitted(model)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    proba = model.predict_proba(X)
    out = np.zeros((len(X), 3))
    out[:, np.asarray(model.classes_, dtype=int)] = proba
    return out / out.sum(axis=1, keepdims=True)


# --- sampling -------------------------------------------------------------------

_MASK64 = (1 << 64) - 1


def tweet_hash(tweet_id):
    """Stable 64-bit hash of a tweet id."""
    digest = hashlib.blake2b(str(tweet_id).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def tweet_hashes(ids):
    return np.array([tweet_hash(i) for i in ids], dtype=np.uint64)


def _splitmix64(x):
    x = (x + np.uint64(0x9E3779B97F4A7C15)).astype(np.uint64)
    x = ((x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)).astype(np.uint64)
    x = ((x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)).astype(np.uint64)
    return x ^ (x >> np.uint64(31))


def stance_uniforms(hashes, master_seed, sim_index):
    """Uniform draws in [0, 1) keyed by ``(master_seed, sim_index, tweet)``.

    Counter-based, so a tweet's draw does not depend on row order or on
    which other tweets are present.
    """
    with np.errstate(over="ignore"):
        key = _splitmix64(np.array([(int(master_seed) * 0x9E3779B1 + 0x632BE5AB) & _MASK64], dtype=np.uint64))
        key = _splitmix64(key ^ np.uint64(int(sim_index) & _MASK64))
        z = _splitmix64(np.asarray(hashes, dtype=np.uint64) ^ key)
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def sample_stances(P, uniforms):
    """Vectorised categorical draw; returns polarity scores (+1, -1, 0)."""
    P = np.asarray(P, dtype=float)
    c = np.cumsum(P, axis=1)
    u = np.asarray(uniforms)
    idx = (u >= c[:, 0]).astype(int) + (u >= c[:, 1]).astype(int)
    return _POLARITY[idx]


def sample_stance(p_s, rng):
    """One categorical stance draw from ``p_s`` (ordered favor, against, neither)."""
    p = np.asarray(p_s, dtype=float)
    return StanceLabel(int(sample_stances(p[None, :], np.array([rng.random()]))[0]))


# --- aggregation ----------------------------------------------------------------

def user_polarity(stances, dates=None, half_life_days=None, reference_date=None):
    """Sum of polarity scores and its sign.

    With ``half_life_days`` the scores are exponentially down-weighted by
    age relative to ``reference_date`` (default: the latest date).
    """
    scores = np.array([int(s) for s in stances], dtype=float)
    if len(scores) == 0:
        return UserStance(0, "Neutral", flagged=True)
    if half_life_days is None:
        total = int(scores.sum())
    else:
        d = pd.to_datetime(pd.Series(dates)).to_numpy("datetime64[D]")
        ref = np.datetime64(reference_date, "D") if reference_date is not None else d.max()
        age = (ref - d).astype(float)
        total = float(scores @ np.power(0.5, age / half_life_days))
    return UserStance(total, verdict_of(total))


def _as_days(dates):
    return pd.to_datetime(pd.Series(dates, dtype=object)).to_numpy("datetime64[D]")


def pro_juul(stances, dates, cutoff):
    """Pro verdict over the tweets dated strictly before ``cutoff``."""
    d = _as_days(dates)
    keep = d < np.datetime64(cutoff, "D")
    return user_polarity([s for s, k in zip(stances, keep) if k]).verdict == "Pro"


def pro_cannabis(stances, dates, cutoff, study_end):
    """Verdict over ``[cutoff, study_end]`` and the earliest in-favor date in that window."""
    d = _as_days(dates)
    keep = (d >= np.datetime64(cutoff, "D")) & (d <= np.datetime64(study_end, "D"))
    window = [(s, day) for s, day, k in zip(stances, d, keep) if k]
    verdict = user_polarity([s for s, _ in window]).verdict == "Pro"
    favor = [day for s, day in window if int(s) == StanceLabel.IN_FAVOR]
    first = min(favor) if favor else None
    return verdict, (None if first is None else pd.Timestamp(first).date())


def polarity_sums(user_codes, scores, n_users):
    """Per-user polarity sums for vectorised Monte-Carlo runs."""
    return np.bincount(user_codes, weights=scores, minlength=n_users)


def first_favor_day(user_codes, days, scores, n_users):
    """Earliest in-favor day per user as ``datetime64[D]`` (NaT when none)."""
    out = np.full(n_users, np.iinfo(np.int64).max, dtype=np.int64)
    fav = scores == int(StanceLabel.IN_FAVOR)
    np.minimum.at(out, user_codes[fav], days[fav].astype(np.int64))
    res = out.astype("datetime64[D]")
    res[out == np.iinfo(np.int64).max] = np.datetime64("NaT")
    return res


def load_stance_annotations(path):
    """``tweet_id,text,label,split`` CSV; labels are normalised to stance names."""
    df = pd.read_csv(path, dtype={"tweet_id": str, "text": str, "label": str, "split": str})
    missing = {"tweet_id", "text", "label", "split"} - set(df.columns)
    if missing:
        raise ValueError(f"stance annotation file lacks columns {sorted(missing)}")
    df["label"] = [STANCE_NAMES[stance_index(v)] for v in df["label"]]
    bad = set(df["split"]) - {"train", "eval"}
    if bad:
        raise ValueError(f"split must be train or eval, got {sorted(bad)}")
    return df
