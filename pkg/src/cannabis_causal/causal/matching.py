"""1:1 nearest-neighbour matching with replacement on covariates or propensity scores."""

from dataclasses import dataclass

import numpy as np


def cosine_distance(x, y):
    """``1 - cos(x, y)`` for two non-zero vectors of equal length."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0 or ny == 0:
        raise ValueError("cosine distance is undefined for a zero vector")
    return float(1.0 - (x @ y) / (nx * ny))


def _unit_rows(A, what):
    A = np.asarray(A, dtype=float)
    norms = np.linalg.norm(A, axis=1)
    if np.any(norms == 0):
        raise ValueError(f"{what} contain a zero covariate vector")
    return A / norms[:, None]


def cosine_distance_matrix(A, B):
    return 1.0 - _unit_rows(A, "rows of A") @ _unit_rows(B, "rows of B").T


@dataclass
class MatchResult:
    """Matched pairs as positional indices into the treated and control arrays.

    ``control`` may repeat (matching is with replacement).
    """

    treated: np.ndarray
    control: np.ndarray
    distance: np.ndarray
    method: str

    def __post_init__(self):
        if not (len(self.treated) == len(self.control) == len(self.distance)):
            raise ValueError("pair arrays must have equal length")
        if np.any(self.distance < 0):
            raise ValueError("distances must be non-negative")

    def __len__(self):
        return len(self.treated)

    def pairs(self, treated_ids=None, control_ids=None):
        """``(treated id, control id)`` tuples; ids default to positions."""
        t = self.treated if treated_ids is None else np.asarray(treated_ids)[self.treated]
        c = self.control if control_ids is None else np.asarray(control_ids)[self.control]
        return list(zip(t.tolist(), c.tolist()))


def _argmin_rows(D):
    # np.argmin returns the first minimum, i.e. the lowest control index on ties
    idx = np.argmin(D, axis=1)
    return idx, D[np.arange(len(D)), idx]


def nnm_match(treated_X, control_X, chunk_size=2048):
    """Match each treated row to the control row with the smallest cosine distance."""
    treated_X = np.atleast_2d(np.asarray(treated_X, dtype=float))
    control_X = np.atleast_2d(np.asarray(control_X, dtype=float))
    if len(control_X) == 0:
        raise ValueError("cannot match against an empty control group")
    C = _unit_rows(control_X, "controls")
    T = _unit_rows(treated_X, "treated units")
    idx = np.empty(len(T), dtype=np.int64)
    dist = np.empty(len(T))
    for start in range(0, len(T), chunk_size):
        D = 1.0 - T[start:start + chunk_size] @ C.T
        idx[start:start + chunk_size], dist[start:start + chunk_size] = _argmin_rows(D)
    # rounding can leave -1e-16 for identical directions
    return MatchResult(np.arange(len(T)), idx, np.maximum(dist, 0.0), "NNM")


def psm_match(treated_e, control_e, squared=True, chunk_size=4096):
    """Match on propensity scores with distance ``(e_i - e_j)**2`` (or ``|e_i - e_j|``).

    The search runs on the absolute gap; squaring is monotone so the
    matches are the same either way, including ties.
    """
    te = np.asarray(treated_e, dtype=float).ravel()
    ce = np.asarray(control_e, dtype=float).ravel()
    if len(ce) == 0:
        raise ValueError("cannot match against an empty control group")
    idx = np.empty(len(te), dtype=np.int64)
    dist = np.empty(len(te))
    for start in range(0, len(te), chunk_size):
        D = np.abs(te[start:start + chunk_size, None] - ce[None, :])
        idx[start:start + chunk_size], dist[start:start + chunk_size] = _argmin_rows(D)
    return MatchResult(np.arange(len(te)), idx, dist**2 if squared else dist, "PSM")
