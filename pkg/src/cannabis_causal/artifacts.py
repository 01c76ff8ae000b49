"""Content-addressed stage directories, manifests and deterministic table I/O."""

import hashlib
import json
import platform
from pathlib import Path

import numpy as np
import pandas as pd

from .corpus import TweetTable

FLOAT_FORMAT = None  # shortest round-trip repr


class MissingArtifactError(FileNotFoundError):
    """An upstream stage output is absent; ``stage`` names the command to run."""

    def __init__(self, stage, path):
        super().__init__(f"missing output of stage '{stage}' at {path}; run `cannabis-causal {stage}` first")
        self.stage = stage


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def sha256_dir(path, names=None):
    path = Path(path)
    names = sorted(p.name for p in path.iterdir() if p.is_file() and p.name != "manifest.json") \
        if names is None else sorted(names)
    return {n: sha256_file(path / n) for n in names}


def stage_key(stage, payload):
    text = json.dumps({"stage": stage, **payload}, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()


def stage_dir(out_dir, stage, key):
    return Path(out_dir) / f"{stage}-{key[:12]}"


def require_stage(out_dir, stage, key):
    d = stage_dir(out_dir, stage, key)
    if not (d / "manifest.json").exists():
        raise MissingArtifactError(stage, d)
    return d


def versions():
    import scipy
    import sklearn

    from . import __version__

    return {
        "cannabis_causal": __version__,
        "numpy": np.__version__,
        "pandas": pd.__version__,
        "python": ".".join(platform.python_version_tuple()[:2]),
        "scikit-learn": sklearn.__version__,
        "scipy": scipy.__version__,
    }


def write_manifest(directory, stage, config_hash, seed, inputs, extra=None):
    """Record config hash, seed, library versions, input and output digests."""
    directory = Path(directory)
    manifest = {
        "stage": stage,
        "config_hash": config_hash,
        "seed": seed,
        "versions": versions(),
        "inputs": inputs,
        "outputs": sha256_dir(directory),
        **(extra or {}),
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def write_csv(frame, path):
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def write_tweet_table(tweets, directory, columns=None):
    """``tweets.csv`` (dates as ISO days) plus a row-aligned ``embeddings.npy``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = tweets.frame if columns is None else tweets.frame[list(columns)]
    out = out.copy()
    out["d"] = pd.to_datetime(out["d"]).dt.strftime("%Y-%m-%d")
    write_csv(out, directory / "tweets.csv")
    with open(directory / "embeddings.npy", "wb") as fh:
        np.save(fh, np.ascontiguousarray(tweets.X, dtype=np.float64))


def read_tweet_table(directory):
    directory = Path(directory)
    if not (directory / "tweets.csv").exists():
        raise FileNotFoundError(f"{directory}: no tweets.csv")
    frame = pd.read_csv(directory / "tweets.csv", keep_default_na=False, na_values={"p_personal": [""]},
                        dtype={"id": str, "user_id": str, "state": str, "text": str, "lang": str,
                               "user_location": str, "dataset": str})
    frame["d"] = pd.to_datetime(frame["d"])
    if "is_retweet" in frame:
        frame["is_retweet"] = frame["is_retweet"].map(
            lambda v: v if isinstance(v, bool) else str(v).strip().lower() == "true")
    X = np.load(directory / "embeddings.npy")
    if len(X) != len(frame):
        raise ValueError(f"{directory}: {len(frame)} tweets but {len(X)} embedding rows")
    return TweetTable(frame, X)
