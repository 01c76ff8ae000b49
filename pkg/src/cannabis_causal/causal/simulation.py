"""Monte-Carlo stance sampling around the effect estimators."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ..cohort import (
    CONTROL_GROUPS,
    HORIZONS,
    STUDY_END,
    TREATED,
    _to_date,
    assign_groups,
    outcome_matrix,
    select_population,
)
from ..corpus import CANNABIS, JUUL, TweetTable, build_users
from ..stance import first_favor_day, polarity_sums, sample_stances, stance_uniforms, tweet_hashes
from .balance import BalanceReport
from .estimators import IPTWEstimator, NaiveDifference, NearestNeighborMatching, PropensityScoreMatching
from .propensity import fit_propensity
from .weighting import DEFAULT_TRIM

logger = logging.getLogger(__name__)

METHODS = ("IPTW-LR", "IPTW-GBM", "PSM-LR", "PSM-GBM", "NNM")
NAIVE = "NAIVE"
CI_MODES = ("paper_literal", "standard_error")
P_COLUMNS = ("p_favor", "p_against", "p_neither")


@dataclass
class EstimationSettings:
    horizons: tuple = HORIZONS
    methods: tuple = ("IPTW-LR",)
    groups: tuple = CONTROL_GROUPS
    trim: tuple = DEFAULT_TRIM
    ci_mode: str = "paper_literal"
    n_sims: int = 200
    master_seed: int = 0
    min_group_size: int = 2
    C: float = 1.0
    gbm_rounds: int = 100
    gbm_depth: int = 3
    gbm_learning_rate: float = 0.1
    n_jobs: int = 1

    def __post_init__(self):
        unknown = set(self.methods) - set(METHODS) - {NAIVE}
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}")
        if self.ci_mode not in CI_MODES:
            raise ValueError(f"ci_mode must be one of {CI_MODES}")
        if self.n_sims < 1:
            raise ValueError("n_sims must be >= 1")
        lo, hi = self.trim
        if not 0 <= lo < hi <= 1:
            raise ValueError("trim bounds must satisfy 0 <= lo < hi <= 1")
        self.min_group_size = max(2, int(self.min_group_size))


# --- study data -----------------------------------------------------------------

@dataclass
class TweetSet:
    """Tweets of one dataset as user codes, days, stance probabilities and hashes."""

    codes: np.ndarray
    days: np.ndarray
    P: np.ndarray
    hashes: np.ndarray

    def draw(self, master_seed, sim_index):
        return sample_stances(self.P, stance_uniforms(self.hashes, master_seed, sim_index))


@dataclass
class StudyData:
    treatment_state: str
    legalization_date: object
    user_ids: np.ndarray
    states: np.ndarray
    groups: np.ndarray
    X: np.ndarray
    d_c: np.ndarray
    juul: TweetSet
    cannabis: TweetSet
    study_end: object = STUDY_END

    @property
    def n_users(self):
        return len(self.user_ids)


def prepare_study(tweets, treatment_state, legalization_date, table, include_retweets=True,
                  study_end=STUDY_END):
    """Build the per-user arrays a simulation needs.

    ``tweets`` is a :class:`TweetTable` of personal tweets whose frame
    carries ``p_favor, p_against, p_neither``. Covariates are the mean
    embedding of each user's tweets dated before the legalization date.
    """
    L = _to_date(legalization_date)
    frame = tweets.frame
    missing = {"id", "user_id", "d", "dataset", "state", "is_retweet", *P_COLUMNS} - set(frame.columns)
    if missing:
        raise ValueError(f"tweet table lacks columns {sorted(missing)}")
    if not include_retweets:
        tweets = tweets.subset(~frame["is_retweet"].astype(bool).to_numpy())
        frame = tweets.frame
    users = build_users(tweets)
    ids = users.frame["id"].to_numpy()
    states = users.frame["state"].to_numpy()
    table.validate_window(L, sorted(set(states)))
    groups = assign_groups(states, treatment_state, L, table)

    codes = pd.Index(ids).get_indexer(frame["user_id"])
    days = frame["d"].to_numpy("datetime64[D]")
    before = days < np.datetime64(L, "D")
    n = len(ids)
    X = np.full((n, tweets.X.shape[1]), np.nan)
    counts = np.bincount(codes[before], minlength=n)
    sums = np.zeros_like(X)
    np.add.at(sums, codes[before], tweets.X[before])
    has = counts > 0
    X[has] = sums[has] / counts[has, None]

    P = frame[list(P_COLUMNS)].to_numpy(dtype=float)
    hashes = tweet_hashes(frame["id"])

    def subset(ds):
        m = (frame["dataset"] == ds).to_numpy()
        return TweetSet(codes[m], days[m], P[m], hashes[m])

    d_c = pd.to_datetime(users.frame["d_c"]).to_numpy("datetime64[D]")
    return StudyData(treatment_state, L, ids, states, groups, X, d_c, subset(JUUL), subset(CANNABIS),
                     _to_date(study_end))


# --- one simulation -------------------------------------------------------------

@dataclass
class SimulationResult:
    sim_index: int
    ates: pd.DataFrame
    balance: dict
    population: dict


def _draw_population(study, settings, sim_index):
    L = np.datetime64(study.legalization_date, "D")
    end = np.datetime64(study.study_end, "D")
    n = study.n_users

    sj = study.juul.draw(settings.master_seed, sim_index)
    pre = study.juul.days < L
    pro_juul = polarity_sums(study.juul.codes[pre], sj[pre], n) > 0

    sc = study.cannabis.draw(settings.master_seed, sim_index)
    win = (study.cannabis.days >= L) & (study.cannabis.days <= end)
    first = first_favor_day(study.cannabis.codes[win], study.cannabis.days[win], sc[win], n)
    Y = outcome_matrix(first, study.legalization_date, settings.horizons)

    eligible = select_population(pro_juul, study.d_c, study.legalization_date)
    return eligible, Y


def _method_estimator(method, settings):
    if method == NAIVE:
        return NaiveDifference(), None
    if method == "NNM":
        return NearestNeighborMatching(), None
    family, kind = method.split("-")
    params = dict(propensity=kind, C=settings.C, n_estimators=settings.gbm_rounds,
                  max_depth=settings.gbm_depth, learning_rate=settings.gbm_learning_rate)
    if family == "IPTW":
        return IPTWEstimator(trim=tuple(settings.trim), **params), kind
    return PropensityScoreMatching(**params), kind


def run_simulation(study, settings, sim_index):
    """One stance draw followed by every configured (group, method) estimate."""
    eligible, Y = _draw_population(study, settings, sim_index)
    rows, balance = [], {}
    population = {"eligible": int(eligible.sum()), TREATED: int((eligible & (study.groups == TREATED)).sum())}
    treated = study.groups == TREATED
    for g in settings.groups:
        mask = eligible & (treated | (study.groups == g))
        population[g] = int((eligible & (study.groups == g)).sum())
        X, T, Yg = study.X[mask], treated[mask].astype(int), Y[mask]
        n_t, n_c = int(T.sum()), int(len(T) - T.sum())
        too_small = min(n_t, n_c) < settings.min_group_size
        scores = {}
        for method in settings.methods:
            base = {"sim_index": sim_index, "method": method, "group": g}
            reason = "insufficient population" if too_small else ""
            est = None
            if not too_small:
                est, kind = _method_estimator(method, settings)
                try:
                    if kind is None:
                        est.fit(X, T, Yg)
                    else:
                        if kind not in scores:
                            scores[kind] = fit_propensity(
                                X, T, kind, C=settings.C, n_estimators=settings.gbm_rounds,
                                max_depth=settings.gbm_depth, learning_rate=settings.gbm_learning_rate,
                            )
                        est.fit(X, T, Yg, e=scores[kind])
                except ValueError as exc:
                    reason, est = str(exc), None
            if est is None:
                for h in settings.horizons:
                    rows.append({**base, "horizon_N": h, "ate": np.nan, "n_treated": n_t,
                                 "n_control": n_c, "n_trimmed": 0, "missing": reason})
                continue
            for h, value in zip(settings.horizons, np.atleast_1d(est.ate_)):
                rows.append({**base, "horizon_N": h, "ate": float(value), "n_treated": est.n_treated_,
                             "n_control": est.n_control_, "n_trimmed": est.n_trimmed_, "missing": ""})
            balance[(method, g)] = est.balance_
    return SimulationResult(sim_index, pd.DataFrame(rows), balance, population)


# --- summaries ------------------------------------------------------------------

@dataclass
class AteSummary:
    group: str
    horizon: int
    mean: float
    sd: float
    n_sims: int
    ci: tuple
    mode: str = "paper_literal"
    method: str = ""

    @property
    def half_width(self):
        return (self.ci[1] - self.ci[0]) / 2.0


def summarize_ci(values, mode="paper_literal", group="", horizon=0, method=""):
    """Mean, sample SD and a 95% interval over per-simulation ATEs.

    ``paper_literal`` uses a half-width of ``1.96 * sd / N``;
    ``standard_error`` uses ``1.96 * sd / sqrt(N)``.
    """
    values = np.asarray(values, dtype=float)
    if mode not in CI_MODES:
        raise ValueError(f"ci mode must be one of {CI_MODES}")
    n = len(values)
    if n < 2:
        raise ValueError("at least two simulations are needed for an interval")
    mean = float(values.mean())
    sd = float(values.std(ddof=1))
    half = 1.96 * sd / (n if mode == "paper_literal" else math.sqrt(n))
    return AteSummary(group, horizon, mean, sd, n, (mean - half, mean + half), mode, method)


@dataclass
class StudyResult:
    settings: EstimationSettings
    simulations: list
    summaries: list = field(default_factory=list)
    balance: list = field(default_factory=list)

    def ate_table(self):
        """One row per (method, group, horizon); NaN statistics mark missing cells."""
        ates = pd.concat([s.ates for s in self.simulations], ignore_index=True)
        rows = []
        for (method, group, h), cell in ates.groupby(["method", "group", "horizon_N"], sort=False):
            ok = cell[cell["missing"] == ""]
            row = {"method": method, "group": group, "horizon_N": int(h)}
            if len(ok) >= 2:
                s = summarize_ci(ok["ate"], self.settings.ci_mode, group, int(h), method)
                row.update(ate_mean=s.mean, ate_sd=s.sd, ci_lo=s.ci[0], ci_hi=s.ci[1])
            elif len(ok) == 1:
                v = float(ok["ate"].iloc[0])
                row.update(ate_mean=v, ate_sd=np.nan, ci_lo=np.nan, ci_hi=np.nan)
            else:
                row.update(ate_mean=np.nan, ate_sd=np.nan, ci_lo=np.nan, ci_hi=np.nan)
            src = ok if len(ok) else cell
            row.update(
                n_treated=float(src["n_treated"].mean()),
                n_control=float(src["n_control"].mean()),
                n_trimmed=float(src["n_trimmed"].mean()),
                n_sims=len(ok),
                flag="" if len(ok) == len(cell) else ("insufficient population" if len(ok) == 0 else "partial"),
            )
            rows.append(row)
        return pd.DataFrame(rows)

    def balance_reports(self):
        """ASMD before/after per (method, group), averaged over simulations."""
        acc = {}
        for sim in self.simulations:
            for key, (before, after) in sim.balance.items():
                acc.setdefault(key, []).append((before, after))
        reports = []
        for (method, group), pairs in acc.items():
            before = np.mean([b for b, _ in pairs], axis=0)
            after = np.mean([a for _, a in pairs], axis=0)
            reports.append(BalanceReport(method, group, before, after))
        return reports

    def balance_table(self):
        reports = self.balance_reports()
        if not reports:
            return pd.DataFrame(columns=["method", "group", "dim", "asmd_before", "asmd_after"])
        return pd.concat([r.to_frame() for r in reports], ignore_index=True)

    def population_table(self):
        return pd.DataFrame([{"sim_index": s.sim_index, **s.population} for s in self.simulations])

    def plot_data(self):
        t = self.ate_table()
        return t.rename(columns={"horizon_N": "months_since_legalization"})[
            ["method", "group", "months_since_legalization", "ate_mean", "ci_lo", "ci_hi"]
        ]

    def summary(self, method, group, horizon):
        """Per-simulation ATEs of one cell as an :class:`AteSummary`."""
        ates = pd.concat([s.ates for s in self.simulations], ignore_index=True)
        cell = ates[(ates["method"] == method) & (ates["group"] == group)
                    & (ates["horizon_N"] == horizon) & (ates["missing"] == "")]
        return summarize_ci(cell["ate"], self.settings.ci_mode, group, horizon, method)


def run_study(study, settings, sim_indices=None):
    """Run ``settings.n_sims`` simulations (optionally on worker threads).

    Results are ordered by simulation index, so the outcome does not
    depend on ``n_jobs``.
    """
    sims = list(range(settings.n_sims)) if sim_indices is None else list(sim_indices)
    if settings.n_jobs > 1:
        with ThreadPoolExecutor(settings.n_jobs) as pool:
            results = list(pool.map(lambda i: run_simulation(study, settings, i), sims))
    else:
        results = [run_simulation(study, settings, i) for i in sims]
    return StudyResult(settings, results)


def sensitivity_grid(tweets, treatment_state, legalization_date, table, settings, study_end=STUDY_END):
    """All five estimators with retweets included and excluded.

    Returns ``(ate_table, balance_table, population_table)`` frames with an
    ``include_retweets`` column.
    """
    from dataclasses import replace

    grid_settings = replace(settings, methods=METHODS)
    ates, bals, pops = [], [], []
    for include in (True, False):
        study = prepare_study(tweets, treatment_state, legalization_date, table,
                              include_retweets=include, study_end=study_end)
        res = run_study(study, grid_settings)
        ates.append(res.ate_table().assign(include_retweets=include))
        bals.append(res.balance_table().assign(include_retweets=include))
        pops.append(res.population_table().assign(include_retweets=include))
    return (pd.concat(ates, ignore_index=True), pd.concat(bals, ignore_index=True),
            pd.concat(pops, ignore_index=True))


__all__ = [
    "AteSummary", "CI_MODES", "EstimationSettings", "METHODS", "NAIVE", "SimulationResult",
    "StudyData", "StudyResult", "TweetSet", "prepare_study", "run_simulation", "run_study",
    "sensitivity_grid", "summarize_ci",
]
