import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_linear_data(rng, n=400, d=5, k=2, scale=1.5):
    """Features plus labels drawn from a softmax over a random linear model."""
    X = rng.normal(size=(n, d))
    W = rng.normal(scale=scale, size=(k, d))
    Z = X @ W.T
    P = np.exp(Z - Z.max(axis=1, keepdims=True))
    P /= P.sum(axis=1, keepdims=True)
    y = np.array([rng.choice(k, p=p) for p in P])
    return X, y


_PERSONAL_TEXTS = [
    "i love my new juul so amazing",
    "my friends and i think this is awesome honestly",
    "i hate how addicted i am now, awful",
    "we tried it last night and it was beautiful and crazy",
]
_NON_PERSONAL_TEXTS = [
    "new report on vaping sales https://news.example/a",
    "state officials release data on retail licenses www.example.org/b",
    "company announces quarterly results https://example.com/c",
    "article: market trends for the coming year https://x.example/d",
]


def weak_supervision_fixture(seed=0, n=200, noise=0.1, dim=6):
    """Gold labels, texts, external scores and embeddings for the personal task.

    Texts follow the labeling-function semantics for the gold class; each of
    the text cue, the pronoun cue and the external score is flipped
    independently with probability ``noise``.
    """
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, size=n)
    texts, scores = [], []
    for label in y:
        lab = label if rng.random() >= noise else 1 - label
        base = rng.choice(_PERSONAL_TEXTS if lab else _NON_PERSONAL_TEXTS)
        if rng.random() < noise:
            base = base + (" https://t.example/z" if label else " i")
        texts.append(str(base))
        s_lab = label if rng.random() >= noise else 1 - label
        scores.append(float(rng.uniform(0.7, 1.0) if s_lab else rng.uniform(0.0, 0.05)))
    X = rng.normal(scale=0.6, size=(n, dim))
    X[:, 0] += 2.0 * y - 1.0
    X[:, 1] += 1.0 * y
    return texts, np.array(scores), X, y


PIPELINE = ("ingest", "weaklabel", "stance", "estimate", "report")


def run_cli(*args):
    from cannabis_causal.cli import main

    return main([str(a) for a in args])


def synth_corpus(out_dir, n_users=300, seed=5, extra=()):
    """Generate a corpus with the CLI and return its directory."""
    import io
    from contextlib import redirect_stdout

    buf = io.StringIO()
    with redirect_stdout(buf):
        code = run_cli("synth", "--seed", seed, "--out-dir", out_dir,
                       "--set", f"synth.n_users={n_users}", "--set", "estimation.n_sims=3", *extra)
    assert code == 0
    from pathlib import Path

    return Path(buf.getvalue().strip())


def run_pipeline(corpus_dir, out_dir, seed=5):
    """Run every stage from ingest to report; return the report directory."""
    import io
    from contextlib import redirect_stdout
    from pathlib import Path

    last = None
    for stage in PIPELINE:
        buf = io.StringIO()
        with redirect_stdout(buf):
            code = run_cli(stage, "--config", corpus_dir / "config.ini", "--seed", seed, "--out-dir", out_dir)
        assert code == 0, stage
        last = Path(buf.getvalue().strip())
    return last


_CRITERIA = []


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(tag, passed, detail)``."""

    def record(tag, passed, detail):
        _CRITERIA.append(f"{'PASS' if passed else 'FAIL'} {tag}: {detail}")
        print(_CRITERIA[-1])
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split()[1][1:].rstrip(":"))):
            terminalreporter.write_line(line)
