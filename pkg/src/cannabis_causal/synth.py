"""Synthetic corpora with a known confounder and analytic treatment effects.

A latent interest ``U ~ N(0, 1)`` tilts each user toward lenient-policy
states and raises the chance of a pro-cannabis tweet; the covariates are a
noisy linear image of ``U`` from which it is exactly recoverable, so a
logistic propensity model in ``X`` is correctly specified.

Outcomes are not drawn here. Each user receives one cannabis tweet per
month after the legalization date whose in-favor probability is chosen so
that, under stance sampling, ``P(Y(N) = 1 | U, tier)`` equals the logit
model ``base_N + gamma * U - tau_tier`` exactly.
"""

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from datetime import date, timedelta
from pathlib import Path

import numpy as np
import pandas as pd
from numpy.polynomial.hermite_e import hermegauss
from scipy import integrate
from scipy.special import expit, logit

from .cohort import (
    CONTROL_GROUP,
    CONTROL_GROUPS,
    HORIZONS,
    LEGALIZATION_DATES,
    TREATED,
    add_months,
    load_policy_table,
)
from .artifacts import read_tweet_table, write_csv, write_tweet_table
from .corpus import CANNABIS, JUUL, TweetTable, load_gazetteer

logger = logging.getLogger(__name__)

# leniency score of each tier; the treated state is recreational
LENIENCY = {TREATED: 1.0, "C1": 0.0, "C2": 1 / 3, "C3": 2 / 3, "C4": 1.0}
# favor / against / neither split of the annotated e-cigarette tweets
JUUL_STANCE_PRIOR = (0.76, 0.07, 0.17)
DEFAULT_BASE_RATES = (0.10, 0.16, 0.22, 0.27, 0.31, 0.35)
_N_QUAD = 96
# extra embedding coordinates: personal marker, favor signal, against signal
_N_EXTRA = 3


@dataclass
class GeneratorSpec:
    """Parameters of a synthetic corpus.

    ``dim`` is the embedding dimension; the last three coordinates carry
    personal and stance signals and the rest the confounder.
    ``shares`` are the target marginal tier proportions (``T`` plus any of
    ``C1``..``C4``); ``tau`` is the logit-scale effect of treatment versus
    each control tier.
    """

    n_users: int = 5000
    shares: dict = field(default_factory=lambda: {TREATED: 0.5, "C1": 0.5})
    tau: dict = field(default_factory=lambda: {"C1": 0.15})
    gamma: float = 1.5
    dim: int = 25
    stance_noise: float = 0.1
    base_rates: tuple = DEFAULT_BASE_RATES
    juul_tweets_mean: float = 2.0
    retweet_rate: float = 0.2
    non_personal_rate: float = 0.3
    bot_rate: float = 0.01
    covariate_scale: float = 2.0
    covariate_noise: float = 0.5
    tweet_noise: float = 0.3
    treatment_state: str = "CA"
    legalization_date: date = LEGALIZATION_DATES["CA"]
    seed: int = 0

    def validate(self):
        if self.n_users < 1:
            raise ValueError("n_users must be positive")
        if TREATED not in self.shares or len(self.shares) < 2:
            raise ValueError("shares need the treated tier and at least one control tier")
        unknown = set(self.shares) - set(LENIENCY)
        if unknown:
            raise ValueError(f"unknown tiers {sorted(unknown)}")
        if any(s <= 0 for s in self.shares.values()):
            raise ValueError("tier shares must be positive")
        for g in self.shares:
            if g != TREATED and g not in self.tau:
                raise ValueError(f"no effect given for control tier {g}")
        for g, t in self.tau.items():
            if not -1 <= t <= 1:
                raise ValueError(f"tau[{g}] = {t} outside [-1, 1]")
        if self.dim <= _N_EXTRA:
            raise ValueError(f"dim must exceed {_N_EXTRA} (reserved signal coordinates)")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if not 0 <= self.stance_noise <= 1:
            raise ValueError("stance_noise must lie in [0, 1]")
        p = np.asarray(self.base_rates, dtype=float)
        if len(p) != len(HORIZONS):
            raise ValueError(f"base_rates needs {len(HORIZONS)} values")
        if np.any(p < 0) or np.any(p >= 1) or np.any(np.diff(p) < 0):
            raise ValueError("infeasible base_rates: need non-decreasing values in [0, 1)")
        last = add_months(self.legalization_date, len(HORIZONS))
        if last > date(2019, 1, 1):
            raise ValueError("outcome window runs past the study end")
        return self


# --- tier model -----------------------------------------------------------------

def _tiers(spec):
    return [TREATED] + [g for g in CONTROL_GROUPS if g in spec.shares]


def tier_weights(spec, max_iter=500, tol=1e-12):
    """Base weights ``pi`` whose tilted mixture has the requested marginal shares.

    ``P(tier j | u)`` is proportional to ``pi_j * exp(gamma * lambda_j * u)``.
    """
    tiers = _tiers(spec)
    target = np.array([spec.shares[t] for t in tiers], dtype=float)
    target /= target.sum()
    lam = np.array([LENIENCY[t] for t in tiers])
    nodes, wq = hermegauss(_N_QUAD)
    wq = wq / wq.sum()
    pi = target.copy()
    for _ in range(max_iter):
        cond = _tier_probs(nodes, pi, lam, spec.gamma)
        marg = wq @ cond
        if np.max(np.abs(marg - target)) < tol:
            break
        pi = pi * target / marg
        pi /= pi.sum()
    return dict(zip(tiers, pi))


def _tier_probs(u, pi, lam, gamma):
    logits = np.log(pi)[None, :] + gamma * np.outer(u, lam)
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    return p / p.sum(axis=1, keepdims=True)


def true_ate(spec, group, horizon, pi=None):
    """Analytic ATE of treatment versus ``group`` over the union of the two tiers.

    Integrates ``sigmoid(b + gamma u) - sigmoid(b + gamma u - tau)``
    against the standard normal density reweighted by the probability of
    belonging to either tier.
    """
    pi = pi or tier_weights(spec)
    tiers = list(pi)
    lam = np.array([LENIENCY[t] for t in tiers])
    p = np.array([pi[t] for t in tiers])
    iT, iC = tiers.index(TREATED), tiers.index(group)
    p_n = spec.base_rates[horizon - 1]
    if p_n == 0:
        return 0.0
    b = logit(p_n)
    tau = spec.tau[group]

    def density(u):
        probs = _tier_probs(np.atleast_1d(u), p, lam, spec.gamma)[0]
        return np.exp(-0.5 * u * u) / np.sqrt(2 * np.pi) * (probs[iT] + probs[iC])

    num = integrate.quad(lambda u: density(u) * (expit(b + spec.gamma * u) - expit(b + spec.gamma * u - tau)),
                         -np.inf, np.inf, epsabs=1e-13, epsrel=1e-11)[0]
    den = integrate.quad(density, -np.inf, np.inf, epsabs=1e-13, epsrel=1e-11)[0]
    return float(num / den)


def ground_truth(spec):
    pi = tier_weights(spec)
    groups = [g for g in CONTROL_GROUPS if g in spec.shares]
    return {
        "tau": {g: spec.tau[g] for g in groups},
        "gamma": spec.gamma,
        "tier_weights": pi,
        "ate": {g: {str(n): true_ate(spec, g, n, pi) for n in HORIZONS} for g in groups},
    }


def monthly_favor_probs(p_cum):
    """Per-month probabilities ``q`` with ``1 - prod(1 - q[:N]) = p_cum[N-1]``."""
    p_cum = np.asarray(p_cum, dtype=float)
    prev = np.concatenate([np.zeros(p_cum.shape[:-1] + (1,)), p_cum[..., :-1]], axis=-1)
    return 1.0 - (1.0 - p_cum) / (1.0 - prev)


# --- corpus -------------------------------------------------------------------

@dataclass
class SyntheticCorpus:
    """Generated users, their personal tweets with true stance probabilities, and the truth record.

    The pipeline-facing raw files are built on first access to ``raw``.
    """

    spec: GeneratorSpec
    users: pd.DataFrame
    tweets: TweetTable
    truth: dict

    def _raw(self):
        if not hasattr(self, "_raw_cache"):
            self._raw_cache = _build_raw(self)
        return self._raw_cache

    @property
    def raw(self):
        return self._raw()[0]

    @property
    def embeddings(self):
        return self._raw()[1]

    @property
    def external_scores(self):
        return self._raw()[2]

    @property
    def stance_annotations(self):
        return self._raw()[3]

    @property
    def blocklist(self):
        return self._raw()[4]


def _states_by_tier(spec, table):
    out = {TREATED: [spec.treatment_state]}
    for s in table.states:
        if s == spec.treatment_state:
            continue
        g = CONTROL_GROUP[table.policy_at(s, spec.legalization_date)]
        out.setdefault(g, []).append(s)
    return out


def _random_day(rng, lo, hi, size=None):
    span = (hi - lo).days
    return np.asarray(lo, dtype="datetime64[D]") + rng.integers(0, span + 1, size=size)


def generate(spec, policy_table=None):
    """Draw a corpus from ``spec``; same spec and seed give identical output."""
    spec.validate()
    table = policy_table or load_policy_table()
    gaz = load_gazetteer()
    state_name = {code: pattern for pattern, code, kind in gaz.entries if kind == "name"}
    tier_states = _states_by_tier(spec, table)
    for t in _tiers(spec):
        if not tier_states.get(t):
            raise ValueError(f"policy table has no state for tier {t}")

    rng = np.random.default_rng(spec.seed)
    n, d = spec.n_users, spec.dim - _N_EXTRA
    L = spec.legalization_date
    tiers = _tiers(spec)
    pi = tier_weights(spec)
    lam = np.array([LENIENCY[t] for t in tiers])

    U = rng.standard_normal(n)
    cond = _tier_probs(U, np.array([pi[t] for t in tiers]), lam, spec.gamma)
    draws = rng.random(n)
    tier_idx = np.minimum((draws[:, None] >= np.cumsum(cond, axis=1)).sum(axis=1), len(tiers) - 1)
    tier = np.array(tiers, dtype=object)[tier_idx]
    state = np.array([tier_states[t][rng.integers(len(tier_states[t]))] for t in tier], dtype=object)

    # covariates: U along a fixed unit direction plus orthogonal noise
    u_dir = np.ones(d) / np.sqrt(d)
    z = rng.standard_normal((n, d)) * spec.covariate_noise
    z -= np.outer(z @ u_dir, u_dir)
    m0 = np.full(d, 0.5)
    X_user = m0 + spec.covariate_scale * np.outer(U, u_dir) + z

    # outcome model -> monthly favor probabilities
    tau = np.array([0.0 if t == TREATED else spec.tau[t] for t in tier])
    with np.errstate(divide="ignore"):
        b = logit(np.asarray(spec.base_rates, dtype=float))
    p_cum = expit(b[None, :] + spec.gamma * U[:, None] - tau[:, None])
    q = monthly_favor_probs(p_cum)

    user_ids = np.array([f"u{i:06d}" for i in range(n)], dtype=object)
    true_juul = rng.choice(3, size=n, p=JUUL_STANCE_PRIOR)
    k_juul = 1 + rng.poisson(spec.juul_tweets_mean, size=n)
    eta = spec.stance_noise

    # JUUL tweets before the legalization date; noise centred per user so
    # the pre-treatment mean embedding is exactly X_user
    ju = np.repeat(np.arange(n), k_juul)
    eps = rng.standard_normal((len(ju), d)) * spec.tweet_noise
    eps -= (np.add.reduceat(eps, np.r_[0, np.cumsum(k_juul)[:-1]]) / k_juul[:, None])[ju]
    juul_lo = date(2016, 1, 1)
    j_days = _random_day(rng, juul_lo, L - timedelta(days=1), size=len(ju))
    order = np.lexsort((j_days, ju))
    j_days = j_days[order]
    j_P = np.full((n, 3), eta / 3)
    j_P[np.arange(n), true_juul] += 1 - eta
    j_P = j_P[ju]
    j_lab = _categorical(rng, j_P)
    j_vec = np.hstack([X_user[ju] + eps, _stance_signal(rng, j_lab, spec)])

    # one cannabis tweet per month window after the legalization date
    n_months = len(HORIZONS)
    cu = np.repeat(np.arange(n), n_months)
    month = np.tile(np.arange(n_months), n)
    lo = np.array([np.datetime64(add_months(L, m), "D") for m in range(n_months)])
    span = np.array([(add_months(L, m + 1) - add_months(L, m)).days for m in range(n_months)])
    c_days = lo[month] + np.floor(rng.random(len(cu)) * span[month]).astype("timedelta64[D]")
    qm = q.ravel()
    c_P = np.column_stack([qm, (1 - qm) * 0.3, (1 - qm) * 0.7])
    c_lab = _categorical(rng, c_P)
    c_vec = np.hstack([m0 + rng.standard_normal((len(cu), d)) * spec.covariate_noise,
                       _stance_signal(rng, c_lab, spec)])

    owner = np.concatenate([ju, cu])
    labels = np.concatenate([j_lab, c_lab])
    P = np.vstack([j_P, c_P])
    X_tweets = np.vstack([j_vec, c_vec])
    ids = np.array([f"t{i:08d}" for i in range(len(owner))], dtype=object)
    label_names = np.array(("favor", "against", "neither"), dtype=object)
    frame = pd.DataFrame({
        "id": ids,
        "user_id": user_ids[owner],
        "d": pd.to_datetime(np.concatenate([j_days, c_days])),
        "dataset": np.array([JUUL] * len(ju) + [CANNABIS] * len(cu), dtype=object),
        "is_retweet": rng.random(len(owner)) < spec.retweet_rate,
        "label": label_names[labels],
    })
    frame["state"] = state[owner]
    frame["p_favor"], frame["p_against"], frame["p_neither"] = P[:, 0], P[:, 1], P[:, 2]
    frame["text"] = [_personal_text(ds, lab, tid) for ds, lab, tid in zip(frame["dataset"], frame["label"], ids)]
    tweets = TweetTable(frame, X_tweets)
    users = pd.DataFrame({"id": user_ids, "state": state, "tier": tier, "U": U,
                          "juul_stance": label_names[true_juul]})
    corpus = SyntheticCorpus(spec, users, tweets, ground_truth(spec))
    corpus._context = {"m0": m0, "locations": {s: state_name.get(s, s) for s in table.states}}
    return corpus


def _build_raw(corpus):
    """Pipeline-facing records: personal tweets, non-personal noise and bot accounts."""
    spec, frame, X_tweets = corpus.spec, corpus.tweets.frame, corpus.tweets.X
    m0, locations = corpus._context["m0"], corpus._context["locations"]
    d = spec.dim - _N_EXTRA
    rng = np.random.default_rng([spec.seed, 1])
    L = spec.legalization_date
    user_ids = corpus.users["id"].to_numpy()
    user_state = dict(zip(user_ids, corpus.users["state"]))

    raw, emb = [], {}
    for rec, vec in zip(frame.itertuples(index=False), X_tweets):
        raw.append(_raw_record(rec.id, rec.user_id, rec.d.date(), rec.text, locations[rec.state],
                               rec.is_retweet, rec.dataset))
        emb[f"e{rec.id}"] = vec
    scores = dict(zip(frame["id"], rng.uniform(0.65, 1.0, size=len(frame)).tolist()))
    n_np = int(round(spec.non_personal_rate * len(frame)))
    days = _random_day(rng, date(2016, 1, 1), date(2018, 12, 31), size=n_np)
    owners = user_ids[rng.integers(len(user_ids), size=n_np)]
    is_juul = rng.random(n_np) < 0.5
    noise = rng.standard_normal((n_np, d)) * spec.covariate_noise
    np_scores = np.where(rng.random(n_np) > 0.1, rng.uniform(0.0, 0.08, n_np), rng.uniform(0.1, 0.6, n_np))
    for j in range(n_np):
        tid = f"n{j:08d}"
        ds = JUUL if is_juul[j] else CANNABIS
        raw.append(_raw_record(tid, owners[j], days[j], _non_personal_text(ds, tid),
                               locations[user_state[owners[j]]], False, ds))
        emb[f"e{tid}"] = np.concatenate([m0 + noise[j], [-1.0, 0.0, 0.0]])
        scores[tid] = float(np_scores[j])
    bots = [f"bot{j:05d}" for j in range(int(round(spec.bot_rate * len(user_ids))))]
    bot_days = _random_day(rng, date(2016, 1, 1), L - timedelta(days=1), size=(len(bots), 3))
    for j, bot in enumerate(bots):
        for r in range(3):
            tid = f"b{j:05d}{r}"
            raw.append(_raw_record(tid, bot, bot_days[j, r], _personal_text(JUUL, "favor", tid),
                                   locations[spec.treatment_state], False, JUUL))
            emb[f"e{tid}"] = np.concatenate([m0, [1.0, 1.0, 0.0]])
            scores[tid] = 0.9
    raw.sort(key=lambda r: r["id"])
    ext = pd.DataFrame(sorted(scores.items()), columns=["tweet_id", "score"])
    annotations = {ds: _annotations(frame, ds, rng) for ds in (JUUL, CANNABIS)}
    return raw, emb, ext, annotations, bots


def _stance_signal(rng, labels, spec):
    labels = np.asarray(labels)
    sig = np.column_stack([np.ones(len(labels)), labels == 0, labels == 1]).astype(float)
    sig[:, 1:] += rng.standard_normal((len(labels), 2)) * spec.tweet_noise
    return sig


def _categorical(rng, P):
    c = np.cumsum(P, axis=1)
    u = rng.random(len(P)) * c[:, -1]
    return np.minimum((u[:, None] >= c).sum(axis=1), P.shape[1] - 1)


_PERSONAL = {
    (JUUL, 0): "i love my juul it is amazing and great",
    (JUUL, 1): "i hate my juul so much it is awful and terrible",
    (JUUL, 2): "i saw a juul at the store today honestly awesome colors and great design",
    (CANNABIS, 0): "i love weed it is amazing and great",
    (CANNABIS, 1): "i hate weed so much it is awful and terrible",
    (CANNABIS, 2): "i read about weed today honestly awesome and great debate",
}
_LABEL_INDEX = {"favor": 0, "against": 1, "neither": 2}


def _personal_text(dataset, label, tid):
    return f"{_PERSONAL[(dataset, _LABEL_INDEX[label])]} e{tid}"


def _non_personal_text(dataset, tid):
    topic = "juul" if dataset == JUUL else "marijuana"
    return f"{topic} market report https://news.example.com/{tid} e{tid}"


def _raw_record(tid, user_id, day, text, location, is_retweet, dataset):
    return {
        "id": tid, "user_id": user_id, "created_at": pd.Timestamp(day).date().isoformat(),
        "text": text, "lang": "en", "user_location": location,
        "is_retweet": bool(is_retweet), "dataset": dataset,
    }


def _annotations(frame, dataset, rng, n=300):
    idx = np.flatnonzero((frame["dataset"] == dataset).to_numpy())
    pick = np.sort(rng.choice(idx, size=min(n, len(idx)), replace=False))
    sub = frame.iloc[pick]
    split = np.where(rng.random(len(sub)) < 0.8, "train", "eval")
    return pd.DataFrame({"tweet_id": sub["id"].to_numpy(), "text": sub["text"].to_numpy(),
                         "label": sub["label"].to_numpy(), "split": split})


def policy_gradient_fixture(spec=None, **overrides):
    """Spec with all four control tiers and effects shrinking with leniency.

    Treated and ``C4`` users share the same leniency and the same outcome
    model, so the ``C4`` contrast has no effect.
    """
    spec = spec or GeneratorSpec()
    base = dict(
        shares={TREATED: 0.2, "C1": 0.2, "C2": 0.2, "C3": 0.2, "C4": 0.2},
        tau={"C1": 1.0, "C2": 0.5, "C3": 0.25, "C4": 0.0},
    )
    base.update(overrides)
    return replace(spec, **base)


# --- files ----------------------------------------------------------------------

def _fmt(v):
    return repr(float(v))


SCORED_COLUMNS = ("id", "user_id", "d", "dataset", "state", "is_retweet", "p_favor", "p_against", "p_neither")


def write_scored_corpus(tweets, directory):
    """Write a scored tweet table as ``tweets.csv`` plus ``embeddings.npy``."""
    write_tweet_table(tweets, directory, SCORED_COLUMNS)


def read_scored_corpus(directory):
    return read_tweet_table(directory)


def write_corpus(corpus, directory, policy_table_path=None):
    """Emit every input file the pipeline reads, plus the oracle files.

    Pipeline inputs: ``tweets.jsonl``, ``embeddings.txt``,
    ``policy_table.csv``, ``lexicon.csv``, ``blocklist.txt``,
    ``external_scores.csv``, ``stance_juul.csv``, ``stance_cannabis.csv``.
    Oracle files: ``oracle/`` (scored corpus and users) and
    ``ground_truth.json``.
    """
    from importlib import resources

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "tweets.jsonl", "w", encoding="utf-8") as fh:
        for rec in corpus.raw:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    with open(directory / "embeddings.txt", "w", encoding="utf-8") as fh:
        for tok in sorted(corpus.embeddings):
            fh.write(tok + " " + " ".join(_fmt(v) for v in corpus.embeddings[tok]) + "\n")
    data = resources.files("cannabis_causal.data")
    src = Path(policy_table_path).read_text() if policy_table_path else data.joinpath("policy_table.csv").read_text()
    (directory / "policy_table.csv").write_text(src)
    (directory / "lexicon.csv").write_text(data.joinpath("subjectivity_lexicon.csv").read_text())
    (directory / "blocklist.txt").write_text("".join(b + "\n" for b in corpus.blocklist))
    write_csv(corpus.external_scores, directory / "external_scores.csv")
    for ds, name in ((JUUL, "stance_juul.csv"), (CANNABIS, "stance_cannabis.csv")):
        write_csv(corpus.stance_annotations[ds], directory / name)
    oracle = directory / "oracle"
    write_scored_corpus(corpus.tweets, oracle)
    write_csv(corpus.users, oracle / "users.csv")
    spec = asdict(corpus.spec)
    spec["legalization_date"] = corpus.spec.legalization_date.isoformat()
    truth = {"spec": spec, **corpus.truth}
    (directory / "ground_truth.json").write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n")
    return directory
