"""Policy timelines, population selection, group assignment and outcomes."""

import calendar
import csv
from dataclasses import dataclass
from datetime import date, datetime
from importlib import resources
from pathlib import Path

import numpy as np
import pandas as pd

ILLEGAL, LIMITED, MEDICAL, RECREATIONAL = "Illegal", "MedicalLimitedTHC", "Medical", "Recreational"
POLICIES = (ILLEGAL, LIMITED, MEDICAL, RECREATIONAL)
CONTROL_GROUP = {ILLEGAL: "C1", LIMITED: "C2", MEDICAL: "C3", RECREATIONAL: "C4"}
TREATED = "T"
CONTROL_GROUPS = ("C1", "C2", "C3", "C4")

LEGALIZATION_DATES = {
    "CA": date(2018, 1, 1),
    "MA": date(2017, 7, 28),
    "VT": date(2018, 7, 1),
}
STUDY_START = date(2016, 1, 1)
STUDY_END = date(2018, 12, 31)
HORIZONS = (1, 2, 3, 4, 5, 6)


def _to_date(value):
    if isinstance(value, datetime):
        return value.date()
    if isinstance(value, date):
        return value
    return pd.Timestamp(value).date()


@dataclass
class PolicyTable:
    """Per-state ordered ``(effective_date, policy)`` timelines."""

    timelines: dict

    def __post_init__(self):
        for state, entries in self.timelines.items():
            dates = [d for d, _ in entries]
            if any(b <= a for a, b in zip(dates, dates[1:])):
                raise ValueError(f"policy dates for {state} are not strictly increasing")
            for _, policy in entries:
                if policy not in POLICIES:
                    raise ValueError(f"unknown policy {policy!r} for {state}")

    @property
    def states(self):
        return sorted(self.timelines)

    def validate_window(self, start, states=None):
        """Raise unless every state (default: all) has an entry on or before ``start``."""
        start = _to_date(start)
        for state in states or self.states:
            entries = self.timelines.get(state)
            if not entries or entries[0][0] > start:
                raise ValueError(f"policy timeline for {state} does not cover {start}")

    def policy_at(self, state, when):
        when = _to_date(when)
        entries = self.timelines.get(state)
        if entries is None:
            raise KeyError(f"state {state!r} not in policy table")
        current = None
        for eff, policy in entries:
            if eff <= when:
                current = policy
            else:
                break
        if current is None:
            raise ValueError(f"timeline incomplete: no policy for {state} on {when}")
        return current


def load_policy_table(path=None):
    """Read a ``state,effective_date,policy`` CSV (the bundled table by default)."""
    if path is None:
        text = resources.files("cannabis_causal.data").joinpath("policy_table.csv").read_text()
    else:
        text = Path(path).read_text()
    timelines = {}
    for row in csv.DictReader(text.splitlines()):
        timelines.setdefault(row["state"].strip(), []).append(
            (date.fromisoformat(row["effective_date"].strip()), row["policy"].strip())
        )
    for entries in timelines.values():
        entries.sort()
    return PolicyTable(timelines)


def policy_at(state, when, table):
    return table.policy_at(state, when)


def add_months(day, n):
    """Same day-of-month ``n`` calendar months later, clamped to the month's end."""
    day = _to_date(day)
    month0 = day.month - 1 + n
    year, month = day.year + month0 // 12, month0 % 12 + 1
    return date(year, month, min(day.day, calendar.monthrange(year, month)[1]))


def select_population(pro_juul, d_c, legalization_date):
    """Eligibility mask: pro-JUUL and no cannabis tweet before the legalization date.

    ``d_c`` holds each user's first cannabis-tweet date (NaT when none).
    """
    d_c = pd.to_datetime(pd.Series(d_c, dtype="object")).to_numpy("datetime64[D]")
    cutoff = np.datetime64(_to_date(legalization_date), "D")
    clean = np.isnat(d_c) | (d_c >= cutoff)
    return np.asarray(pro_juul, dtype=bool) & clean


def assign_groups(states, treatment_state, legalization_date, table):
    """``T`` for the treatment state, else ``C1``..``C4`` by policy on the legalization date."""
    when = _to_date(legalization_date)
    cache = {}
    out = []
    for s in states:
        if s == treatment_state:
            out.append(TREATED)
            continue
        if s not in cache:
            cache[s] = CONTROL_GROUP[table.policy_at(s, when)]
        out.append(cache[s])
    return np.array(out, dtype=object)


def outcome(first_pro_date, legalization_date, n_months):
    """1 iff the first pro-cannabis tweet falls before ``legalization_date + n_months``."""
    if first_pro_date is None or pd.isna(first_pro_date):
        return 0
    return int(_to_date(first_pro_date) < add_months(legalization_date, n_months))


def outcome_matrix(first_pro_days, legalization_date, horizons=HORIZONS):
    """``n x len(horizons)`` binary outcomes from ``datetime64[D]`` first-pro days."""
    first = np.asarray(first_pro_days, dtype="datetime64[D]")
    ends = np.array([np.datetime64(add_months(legalization_date, n), "D") for n in horizons])
    valid = ~np.isnat(first)
    return (valid[:, None] & (first[:, None] < ends[None, :])).astype(np.int8)
