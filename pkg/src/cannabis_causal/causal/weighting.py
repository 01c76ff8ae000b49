"""Inverse probability of treatment weighting."""

import numpy as np

DEFAULT_TRIM = (0.05, 0.95)


def trim_mask(e, trim=DEFAULT_TRIM):
    """Units whose score lies in the closed interval ``trim``."""
    lo, hi = trim
    e = np.asarray(e, dtype=float)
    return (e >= lo) & (e <= hi)


def iptw_weights(e, T, trim=DEFAULT_TRIM):
    """``w = T/e + (1-T)/(1-e)`` and the mask of units kept after trimming.

    ``trim=None`` keeps every unit.
    """
    e = np.asarray(e, dtype=float)
    T = np.asarray(T, dtype=float)
    if np.any((e <= 0) | (e >= 1)):
        raise ValueError("propensity scores must lie strictly inside (0, 1)")
    w = T / e + (1.0 - T) / (1.0 - e)
    kept = np.ones(len(e), dtype=bool) if trim is None else trim_mask(e, trim)
    return w, kept


def ate_iptw(T, Y, w, kept=None):
    """Normalised (Hajek) weighted difference of treated and control outcome means.

    ``Y`` may be a vector or an ``n x H`` matrix (one column per horizon).
    """
    T = np.asarray(T).astype(bool)
    w = np.asarray(w, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if kept is not None:
        kept = np.asarray(kept, dtype=bool)
        T, w, Y = T[kept], w[kept], Y[kept]
    if not T.any() or T.all():
        raise ValueError("a treatment group is empty after trimming")
    wt, wc = w * T, w * ~T
    return (wt @ Y) / wt.sum() - (wc @ Y) / wc.sum()
