"""Matched and naive effect estimates."""

import numpy as np


def ate_matched(match, treated_Y, control_Y):
    """Mean over treated units of ``Y_i(1) - Y_match(i)(0)``.

    This averages over the treated only, so it targets the effect on the
    treated even though it is reported alongside the weighted estimates.
    """
    ty = np.asarray(treated_Y, dtype=float)
    cy = np.asarray(control_Y, dtype=float)
    if len(match) != len(ty):
        raise ValueError("match must cover every treated unit")
    return (ty[match.treated] - cy[match.control]).mean(axis=0)


def naive_difference(T, Y):
    """Unadjusted difference of treated and control outcome means."""
    T = np.asarray(T).astype(bool)
    Y = np.asarray(Y, dtype=float)
    if not T.any() or T.all():
        raise ValueError("both groups must be non-empty")
    return Y[T].mean(axis=0) - Y[~T].mean(axis=0)
