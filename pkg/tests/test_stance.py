from datetime import date

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cannabis_causal.stance import (
    StanceLabel,
    first_favor_day,
    polarity_sums,
    predict_stance,
    pro_cannabis,
    pro_juul,
    sample_stance,
    sample_stances,
    stance_index,
    stance_uniforms,
    train_stance_model,
    tweet_hashes,
    user_polarity,
)

from conftest import make_linear_data


def test_sampling_frequencies_match_probabilities():
    p = np.array([0.6, 0.3, 0.1])
    hashes = tweet_hashes([f"t{i}" for i in range(30_000)])
    scores = sample_stances(np.tile(p, (len(hashes), 1)), stance_uniforms(hashes, 7, 0))
    freq = [np.mean(scores == 1), np.mean(scores == -1), np.mean(scores == 0)]
    np.testing.assert_allclose(freq, p, atol=0.01)


def test_uniforms_are_counter_based():
    h = tweet_hashes(["a", "b", "c", "d"])
    u = stance_uniforms(h, 3, 5)
    np.testing.assert_array_equal(stance_uniforms(h[::-1], 3, 5), u[::-1])
    np.testing.assert_array_equal(stance_uniforms(h[:2], 3, 5), u[:2])
    assert not np.array_equal(stance_uniforms(h, 3, 6), u)
    assert not np.array_equal(stance_uniforms(h, 4, 5), u)
    assert np.all((u >= 0) & (u < 1))


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_degenerate_probabilities_are_deterministic(a, u):
    P = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    np.testing.assert_array_equal(sample_stances(P, np.full(3, min(u, 1 - 1e-12))), [1, -1, 0])


def test_sample_stance_returns_label(rng):
    assert sample_stance([0, 0, 1], rng) is StanceLabel.NEITHER


def test_polarity_and_verdicts():
    assert user_polarity([1, 1, -1]).verdict == "Pro"
    assert user_polarity([1, -1]).verdict == "Neutral"
    empty = user_polarity([])
    assert empty.flagged and empty.verdict == "Neutral"
    decayed = user_polarity([1, -1], ["2018-01-01", "2018-01-11"], half_life_days=10)
    assert decayed.polarity_sum == pytest.approx(-0.5)


def test_pro_juul_uses_tweets_before_cutoff():
    dates = ["2017-12-30", "2017-12-31", "2018-01-01"]
    assert pro_juul([1, 0, -1], dates, date(2018, 1, 1))
    assert not pro_juul([1, -1, 1], dates, date(2018, 1, 1))


def test_pro_cannabis_window():
    verdict, first = pro_cannabis(
        [1, -1, 1, 1], ["2017-12-31", "2018-02-01", "2018-03-01", "2019-01-02"],
        date(2018, 1, 1), date(2018, 12, 31),
    )
    assert not verdict and first == date(2018, 3, 1)


def test_vectorised_aggregates():
    codes = np.array([0, 0, 1, 2, 2])
    scores = np.array([1, 1, -1, 0, 1])
    days = np.array(["2018-03-01", "2018-02-01", "2018-01-01", "2018-01-05", "2018-04-01"], dtype="datetime64[D]")
    np.testing.assert_array_equal(polarity_sums(codes, scores, 4), [2, -1, 1, 0])
    first = first_favor_day(codes, days, scores, 4)
    assert first[0] == np.datetime64("2018-02-01")
    assert np.isnat(first[1]) and np.isnat(first[3])
    assert first[2] == np.datetime64("2018-04-01")


def test_stance_model_probabilities(rng):
    X, y = make_linear_data(rng, n=300, d=4, k=3)
    names = np.array(["favor", "against", "neutral"])[y]
    model = train_stance_model(X, names)
    P = predict_stance(X, model)
    assert P.shape == (300, 3)
    np.testing.assert_allclose(P.sum(axis=1), 1.0)
    assert np.mean(P.argmax(axis=1) == y) > 0.6
    with pytest.raises(ValueError):
        stance_index("maybe")


def test_uniform_probabilities_sample_evenly():
    hashes = tweet_hashes(range(30_000))
    scores = sample_stances(np.full((30_000, 3), 1 / 3), stance_uniforms(hashes, 0, 0))
    for v in (1, -1, 0):
        assert np.mean(scores == v) == pytest.approx(1 / 3, abs=0.01)


def test_saturated_model_recovers_training_tweet(rng):
    X = np.vstack([rng.normal(loc=c, scale=0.1, size=(40, 3)) for c in np.eye(3) * 3])
    names = ["favor"] * 40 + ["against"] * 40 + ["neither"] * 40
    model = train_stance_model(X, names, C=1e4)
    assert predict_stance(X[5], model).argmax() == 0
