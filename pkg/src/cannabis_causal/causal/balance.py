"""Covariate balance via absolute standardised mean differences."""

from dataclasses import dataclass

import numpy as np
import pandas as pd

ASMD_THRESHOLD = 0.1


def _moments(X, w):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if len(X) < 2:
        raise ValueError("each group needs at least two units for ASMD")
    if w is None:
        return X.mean(axis=0), X.var(axis=0, ddof=1)
    w = np.asarray(w, dtype=float)
    v1, v2 = w.sum(), w @ w
    mean = w @ X / v1
    # reliability-weight correction; reduces to ddof=1 for unit weights
    var = w @ (X - mean) ** 2 / (v1 - v2 / v1)
    return mean, var


def asmd_columns(treated, control, treated_weights=None, control_weights=None):
    """Per-column ``|m_t - m_c| / sqrt((v_t + v_c) / 2)``.

    Zero pooled spread gives 0 when the means agree and ``inf`` otherwise.
    """
    mt, vt = _moments(treated, treated_weights)
    mc, vc = _moments(control, control_weights)
    diff = np.abs(mt - mc)
    sd = np.sqrt((vt + vc) / 2.0)
    out = np.full(diff.shape, np.inf)
    pos = sd > 0
    out[pos] = diff[pos] / sd[pos]
    out[~pos & (diff == 0)] = 0.0
    return out


def asmd(treated, control, weights=None):
    """Scalar ASMD for one covariate; ``weights`` is ``(w_treated, w_control)``."""
    wt, wc = weights if weights is not None else (None, None)
    return float(asmd_columns(np.ravel(treated), np.ravel(control), wt, wc)[0])


@dataclass
class BalanceReport:
    method: str
    group: str
    asmd_before: np.ndarray
    asmd_after: np.ndarray

    @property
    def flagged(self):
        """True when some dimension has zero spread but differing means."""
        return bool(np.isinf(self.asmd_before).any() or np.isinf(self.asmd_after).any())

    def summary(self):
        return {
            "median_before": float(np.median(self.asmd_before)),
            "median_after": float(np.median(self.asmd_after)),
            "share_after_below_threshold": float(np.mean(self.asmd_after < ASMD_THRESHOLD)),
        }

    def to_frame(self):
        return pd.DataFrame({
            "method": self.method,
            "group": self.group,
            "dim": np.arange(len(self.asmd_before)),
            "asmd_before": self.asmd_before,
            "asmd_after": self.asmd_after,
        })
