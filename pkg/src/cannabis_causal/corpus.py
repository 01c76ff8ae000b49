"""Tweet ingestion, location parsing, text embedding and user aggregation."""

import csv
import json
import logging
import re
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin

logger = logging.getLogger(__name__)

JUUL, CANNABIS = "JUUL", "CANNABIS"
DATASETS = (JUUL, CANNABIS)

JUUL_KEYWORDS = ("juul", "juulvapor", "juulnation", "doit4juul")
CANNABIS_KEYWORDS = (
    "weed", "ganja", "marijuana", "cannabis", "mary jane", "thc", "marihuana", "hash", "reefer",
    "hashish", "bhang", "cbd", "green goddess", "locoweed", "maryjane", "spliff", "hemp",
    "wacky baccy", "sinsemilla", "doobie", "acapulco gold",
)
DATE_RANGES = {
    JUUL: (date(2016, 1, 1), date(2018, 12, 31)),
    CANNABIS: (date(2014, 1, 1), date(2018, 12, 31)),
}
OFFICIAL_HANDLES = ("juulvapor",)

URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
MENTION_RE = re.compile(r"@\w+")
_NON_ALNUM = re.compile(r"[^a-z0-9]+")


def tokenize(text):
    """Lowercase, strip URLs and @mentions, split on non-alphanumerics."""
    text = MENTION_RE.sub(" ", URL_RE.sub(" ", text or "")).lower()
    return [t for t in _NON_ALNUM.split(text) if t]


def contains_phrase(tokens, phrase_tokens):
    n = len(phrase_tokens)
    return any(tokens[i:i + n] == phrase_tokens for i in range(len(tokens) - n + 1))


def match_keywords(text, keywords):
    """Whole-token, case-insensitive match; multiword keys match as token runs."""
    tokens = tokenize(text)
    token_set = set(tokens)
    for kw in keywords:
        kw_tokens = tokenize(kw)
        if len(kw_tokens) == 1:
            if kw_tokens[0] in token_set:
                return True
        elif contains_phrase(tokens, kw_tokens):
            return True
    return False


# --- location -----------------------------------------------------------------

_KIND_ORDER = ("name", "abbrev", "city")


def _norm(text):
    return " " + " ".join(_NON_ALNUM.split(text.lower())).strip() + " "


@dataclass
class Gazetteer:
    """Patterns mapping free-text locations to state codes.

    ``entries`` holds ``(pattern, state_code, kind)`` with kind one of
    ``name``, ``abbrev`` or ``city``.
    """

    entries: list

    def __post_init__(self):
        self._compiled = {k: [] for k in _KIND_ORDER}
        for pattern, code, kind in self.entries:
            if kind not in self._compiled:
                raise ValueError(f"unknown gazetteer kind {kind!r}")
            if kind == "abbrev":
                # abbreviations are matched case-sensitively so "in"/"or"/"me" in prose do not fire
                rx = re.compile(r"(?<![A-Za-z])" + re.escape(pattern) + r"(?![A-Za-z])")
            else:
                rx = _norm(pattern)
            self._compiled[kind].append((len(pattern), rx, code))
        for kind in _KIND_ORDER:
            # longest pattern first, so "West Virginia" beats "Virginia"
            self._compiled[kind].sort(key=lambda item: -item[0])

    @property
    def states(self):
        return sorted({code for _, code, _ in self.entries})

    def parse(self, text):
        if not text:
            return None
        normed = _norm(text)
        for kind in _KIND_ORDER:
            for _, rx, code in self._compiled[kind]:
                hit = rx.search(text) if kind == "abbrev" else rx in normed
                if hit:
                    return code
        return None


def load_gazetteer(path=None):
    """Read a ``pattern,state_code,kind`` CSV (the bundled one by default)."""
    if path is None:
        text = resources.files("cannabis_causal.data").joinpath("gazetteer.csv").read_text()
    else:
        text = Path(path).read_text()
    rows = list(csv.DictReader(text.splitlines()))
    return Gazetteer([(r["pattern"], r["state_code"], r["kind"]) for r in rows])


def parse_location(profile_text, gazetteer):
    """State code for a free-text location, or ``None`` if nothing matches.

    Precedence is state name, then abbreviation, then city.
    """
    return gazetteer.parse(profile_text)


# --- embeddings ---------------------------------------------------------------

@dataclass
class EmbeddingTable:
    vectors: dict
    dim: int

    def __post_init__(self):
        for tok, vec in self.vectors.items():
            if len(vec) != self.dim:
                raise ValueError(f"token {tok!r} has dimension {len(vec)}, expected {self.dim}")

    def lookup(self, token):
        return self.vectors.get(token.lower())


def load_embeddings(path, dim=None):
    """Read GloVe-style text embeddings: ``token f1 f2 ... fn`` per line."""
    vectors = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                continue
            vec = np.asarray(parts[1:], dtype=float)
            if dim is None:
                dim = len(vec)
            if len(vec) != dim:
                raise ValueError(f"{path}:{lineno}: expected {dim} values, got {len(vec)}")
            vectors[parts[0].lower()] = vec
    if dim is None:
        raise ValueError(f"{path}: no embeddings found")
    return EmbeddingTable(vectors, dim)


def embed_text(text, table):
    """Mean of in-vocabulary token vectors; ``None`` when no token is known."""
    vecs = [v for v in (table.lookup(t) for t in tokenize(text)) if v is not None]
    if not vecs:
        return None
    return np.mean(vecs, axis=0)


class MeanEmbeddingVectorizer(BaseEstimator, TransformerMixin):
    """Map texts to mean word vectors.

    Rows with no in-vocabulary token come out as NaN; ``empty_mask`` reports
    them.
    """

    def __init__(self, table):
        self.table = table

    def fit(self, X=None, y=None):
        self.n_features_out_ = self.table.dim
        return self

    def transform(self, texts):
        out = np.full((len(texts), self.table.dim), np.nan)
        for i, text in enumerate(texts):
            vec = embed_text(text, self.table)
            if vec is not None:
                out[i] = vec
        return out

    @staticmethod
    def empty_mask(X):
        return np.isnan(X).any(axis=1)


# --- tables -------------------------------------------------------------------

@dataclass
class TweetTable:
    """Row-aligned tweet metadata and embedding matrix."""

    frame: pd.DataFrame
    X: np.ndarray

    def __len__(self):
        return len(self.frame)

    def subset(self, mask):
        mask = np.asarray(mask)
        return TweetTable(self.frame.loc[mask].reset_index(drop=True), self.X[mask])


@dataclass
class UserTable:
    """Row-aligned per-user aggregates (``id, state, d_j, d_c``) and mean embeddings."""

    frame: pd.DataFrame
    X: np.ndarray

    def __len__(self):
        return len(self.frame)

    def subset(self, mask):
        mask = np.asarray(mask)
        return UserTable(self.frame.loc[mask].reset_index(drop=True), self.X[mask])


@dataclass
class IngestFilters:
    keywords: dict = field(default_factory=lambda: {JUUL: JUUL_KEYWORDS, CANNABIS: CANNABIS_KEYWORDS})
    date_ranges: dict = field(default_factory=lambda: dict(DATE_RANGES))
    languages: tuple = ("en",)
    excluded_users: tuple = OFFICIAL_HANDLES
    strict: bool = False


@dataclass
class IngestReport:
    read: int = 0
    kept: int = 0
    malformed: list = field(default_factory=list)
    dropped: dict = field(default_factory=dict)

    def drop(self, reason):
        self.dropped[reason] = self.dropped.get(reason, 0) + 1


def parse_day(value):
    """UTC calendar day of an ISO-8601 timestamp or date string."""
    text = str(value).strip()
    if len(text) == 10:
        return date.fromisoformat(text)
    dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if dt.tzinfo is not None:
        dt = dt.astimezone(timezone.utc)
    return dt.date()


_REQUIRED = ("id", "user_id", "created_at", "text")


def _classify_dataset(record, text, filters):
    tag = record.get("dataset")
    if tag:
        tag = str(tag).upper()
        if tag not in DATASETS:
            raise ValueError(f"unknown dataset tag {tag!r}")
        return tag if match_keywords(text, filters.keywords[tag]) else None
    for ds in DATASETS:
        if match_keywords(text, filters.keywords[ds]):
            return ds
    return None


def ingest(path, filters=None, gazetteer=None, table=None):
    """Read JSON-lines tweet records and apply language, keyword, date and location filters.

    Returns ``(TweetTable, IngestReport)``. When ``table`` is given, tweets
    are embedded and those without any in-vocabulary token are dropped;
    otherwise ``X`` has zero columns.
    """
    filters = filters or IngestFilters()
    gazetteer = gazetteer or load_gazetteer()
    excluded = {u.lower() for u in filters.excluded_users}
    langs = tuple(filters.languages)
    report = IngestReport()
    rows, vecs, seen = [], [], set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            report.read += 1
            try:
                rec = json.loads(line)
                missing = [k for k in _REQUIRED if k not in rec]
                if missing:
                    raise ValueError(f"missing fields {missing}")
                day = parse_day(rec["created_at"])
                text = str(rec["text"])
                dataset = _classify_dataset(rec, text, filters)
            except (ValueError, TypeError, json.JSONDecodeError) as exc:
                if filters.strict:
                    raise ValueError(f"{path}:{lineno}: {exc}") from exc
                logger.warning("%s:%d: skipping malformed record (%s)", path, lineno, exc)
                report.malformed.append(lineno)
                continue
            tweet_id, user_id = str(rec["id"]), str(rec["user_id"])
            lang = str(rec.get("lang") or "")
            if not lang.lower().startswith(langs):
                report.drop("language")
                continue
            if dataset is None:
                report.drop("keyword")
                continue
            lo, hi = filters.date_ranges[dataset]
            if not lo <= day <= hi:
                report.drop("date")
                continue
            if user_id.lower() in excluded:
                report.drop("excluded_user")
                continue
            state = parse_location(rec.get("user_location") or "", gazetteer)
            if state is None:
                report.drop("location")
                continue
            if tweet_id in seen:
                report.drop("duplicate")
                continue
            if table is not None:
                vec = embed_text(text, table)
                if vec is None:
                    report.drop("no_vocabulary")
                    continue
                vecs.append(vec)
            seen.add(tweet_id)
            rows.append({
                "id": tweet_id,
                "user_id": user_id,
                "d": pd.Timestamp(day),
                "text": text,
                "dataset": dataset,
                "is_retweet": bool(rec.get("is_retweet", False)),
                "lang": lang,
                "user_location": rec.get("user_location") or "",
                "state": state,
            })
    report.kept = len(rows)
    frame = pd.DataFrame(rows, columns=[
        "id", "user_id", "d", "text", "dataset", "is_retweet", "lang", "user_location", "state"
    ])
    frame["d"] = pd.to_datetime(frame["d"])
    dim = table.dim if table is not None else 0
    X = np.vstack(vecs) if vecs else np.empty((0, dim))
    return TweetTable(frame, X), report


def write_records(tweets, path):
    """Write a tweet table back out as JSON lines (inverse of :func:`ingest`)."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in tweets.frame.itertuples(index=False):
            fh.write(json.dumps({
                "id": rec.id, "user_id": rec.user_id, "created_at": rec.d.date().isoformat(),
                "text": rec.text, "lang": rec.lang, "user_location": rec.user_location,
                "is_retweet": bool(rec.is_retweet), "dataset": rec.dataset,
            }, sort_keys=True) + "\n")


def build_users(tweets):
    """Aggregate tweets per user: mean embedding, state, first JUUL and cannabis dates."""
    frame = tweets.frame
    if len(frame) == 0:
        cols = ["id", "state", "d_j", "d_c", "n_tweets"]
        return UserTable(pd.DataFrame(columns=cols), np.empty((0, tweets.X.shape[1])))
    codes, uniques = pd.factorize(frame["user_id"], sort=True)
    n_users = len(uniques)
    counts = np.bincount(codes, minlength=n_users)
    X = np.zeros((n_users, tweets.X.shape[1]))
    np.add.at(X, codes, tweets.X)
    X /= counts[:, None]
    grouped = frame.assign(_u=codes).groupby("_u")
    juul = frame["d"].where(frame["dataset"] == JUUL)
    cann = frame["d"].where(frame["dataset"] == CANNABIS)
    users = pd.DataFrame({
        "id": np.asarray(uniques, dtype=object),
        # the most frequent parsed state; ties resolved alphabetically
        "state": grouped["state"].agg(lambda s: s.value_counts().sort_index().idxmax()).to_numpy(),
        "d_j": juul.groupby(codes).min().reindex(range(n_users)).to_numpy(),
        "d_c": cann.groupby(codes).min().reindex(range(n_users)).to_numpy(),
        "n_tweets": counts,
    })
    return UserTable(users, X)


def read_blocklist(path):
    with open(path, encoding="utf-8") as fh:
        return {line.strip() for line in fh if line.strip()}


def filter_bots(users, blocklist):
    """Drop users whose id is on the blocklist.

    ``blocklist`` is a path to a one-id-per-line file or an iterable of
    ids; ``None`` disables filtering explicitly. Returns
    ``(UserTable, removed_count)``.
    """
    if blocklist is None:
        return users, 0
    if isinstance(blocklist, (str, Path)):
        if not Path(blocklist).exists():
            raise FileNotFoundError(f"bot blocklist {blocklist} not found (pass None to disable)")
        blocklist = read_blocklist(blocklist)
    blocked = {str(b) for b in blocklist}
    keep = ~users.frame["id"].astype(str).isin(blocked).to_numpy()
    removed = int((~keep).sum())
    logger.info("bot filter removed %d users", removed)
    return users.subset(keep), removed
