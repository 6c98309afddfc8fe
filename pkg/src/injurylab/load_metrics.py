"""Daily training-load features.

For each workload variable: rolling averages and exponentially weighted
moving averages over 3/6/21 days, acute:chronic workload ratios (3 and 6 day
acute vs 21 day chronic, plain and exponentially weighted) and 7-day
monotony/strain.  Every feature on day i is computed from loads strictly
before day i, so perturbing a day's load never changes that day's features.

Series are dense per (athlete, season) calendar-day arrays; non-session days
contribute zero load.  Accumulators reset at season boundaries.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .domain import DailyPanel, infer_season_starts

VARIABLES = ("distance", "msr", "hsr", "srpe", "player_load")
#: monotony/strain are undefined for high speed running (weekly loads often zero)
MONOTONY_VARIABLES = ("distance", "msr", "srpe", "player_load")

RA_WINDOWS = (3, 6, 21)
EWMA_SPANS = (3, 6, 21)
ACUTE_WINDOWS = (3, 6)
CHRONIC_WINDOW = 21
MONOTONY_WINDOW = 7
#: monotony value when the week has load but (near-)zero daily variation
MONOTONY_CAP = 10.0
_SD_EPS = 1e-12


def ewma_lambda(span: int) -> float:
    """Decay weight for a given span: 2 / (span + 1)."""
    return 2.0 / (span + 1.0)


# ---------------------------------------------------------------------------
# Per-day scalar features (w is the daily load array for one athlete-season)


def rolling_average(w, i: int, window: int) -> float:
    """Mean load over the `window` days strictly before day i; nan if i < window."""
    w = np.asarray(w, dtype=float)
    if i < window:
        return float("nan")
    return float(np.mean(w[i - window:i]))


def ewma(w, i: int, span: int) -> float:
    """Exponentially weighted moving average at day i, seeded at 0.

    Recurrence value_{j+1} = lam * w_j + (1 - lam) * value_j, evaluated from
    the season start; the result depends only on loads before day i.
    """
    w = np.asarray(w, dtype=float)
    lam = ewma_lambda(span)
    value = 0.0
    for j in range(i):
        value = lam * w[j] + (1.0 - lam) * value
    return value


def monotony7(w, i: int, cap: float = MONOTONY_CAP, variable: str | None = None) -> float:
    """Mean / sample standard deviation of the previous 7 daily loads.

    All-zero week -> 0; zero-variance week with load -> `cap`.
    """
    if variable == "hsr":
        raise ValueError("monotony is not defined for hsr")
    w = np.asarray(w, dtype=float)
    if i < MONOTONY_WINDOW:
        return float("nan")
    week = w[i - MONOTONY_WINDOW:i]
    total = float(np.sum(week))
    if np.isnan(total):
        return float("nan")
    if total == 0.0:
        return 0.0
    sd = float(np.std(week, ddof=1))
    if sd < _SD_EPS:
        return cap
    return float(np.mean(week)) / sd


def strain7(w, i: int, cap: float = MONOTONY_CAP, variable: str | None = None) -> float:
    """Sum of the previous 7 daily loads times the monotony over the same week."""
    if variable == "hsr":
        raise ValueError("strain is not defined for hsr")
    w = np.asarray(w, dtype=float)
    if i < MONOTONY_WINDOW:
        return float("nan")
    total = float(np.sum(w[i - MONOTONY_WINDOW:i]))
    if np.isnan(total):
        return float("nan")
    if total == 0.0:
        return 0.0
    return total * monotony7(w, i, cap=cap)


def acwr(w, i: int, acute: int = 3, chronic: int = CHRONIC_WINDOW) -> float:
    """Acute:chronic workload ratio; 0 when there is no chronic workload."""
    w = np.asarray(w, dtype=float)
    if i < chronic:
        return float("nan")
    chronic_mean = float(np.mean(w[i - chronic:i]))
    if np.isnan(chronic_mean):
        return float("nan")
    if chronic_mean == 0.0:
        return 0.0
    return float(np.mean(w[i - acute:i])) / chronic_mean


def ew_acwr(w, i: int, span_acute: int = 3, span_chronic: int = CHRONIC_WINDOW) -> float:
    """ACWR with the rolling averages replaced by EWMAs; 0 when the chronic EWMA is 0."""
    chronic_value = ewma(w, i, span_chronic)
    if np.isnan(chronic_value):
        return float("nan")
    if chronic_value == 0.0:
        return 0.0
    return ewma(w, i, span_acute) / chronic_value


# ---------------------------------------------------------------------------
# Whole-series versions (value for every day of the season at once)


def rolling_average_series(w, window: int) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    n = w.size
    out = np.full(n, np.nan)
    if n > window:
        means = sliding_window_view(w, window).mean(axis=1)
        out[window:] = means[: n - window]
    return out


def ewma_series(w, span: int) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    lam = ewma_lambda(span)
    out = np.empty(w.size)
    value = 0.0
    for i in range(w.size):
        out[i] = value
        value = lam * w[i] + (1.0 - lam) * value
    return out


def monotony7_series(w, cap: float = MONOTONY_CAP) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    n = w.size
    out = np.full(n, np.nan)
    if n <= MONOTONY_WINDOW:
        return out
    weeks = sliding_window_view(w, MONOTONY_WINDOW)[: n - MONOTONY_WINDOW]
    totals = weeks.sum(axis=1)
    sds = weeks.std(axis=1, ddof=1)
    means = totals / MONOTONY_WINDOW
    with np.errstate(invalid="ignore", divide="ignore"):
        values = means / sds
    values = np.where(sds < _SD_EPS, cap, values)
    values = np.where(totals == 0.0, 0.0, values)
    out[MONOTONY_WINDOW:] = values
    return out


def strain7_series(w, cap: float = MONOTONY_CAP) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    n = w.size
    out = np.full(n, np.nan)
    if n <= MONOTONY_WINDOW:
        return out
    totals = sliding_window_view(w, MONOTONY_WINDOW)[: n - MONOTONY_WINDOW].sum(axis=1)
    out[MONOTONY_WINDOW:] = totals * monotony7_series(w, cap=cap)[MONOTONY_WINDOW:]
    return out


def acwr_series(w, acute: int, chronic: int = CHRONIC_WINDOW) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    n = w.size
    out = np.full(n, np.nan)
    if n <= chronic:
        return out
    acute_means = rolling_average_series(w, acute)[chronic:]
    chronic_means = rolling_average_series(w, chronic)[chronic:]
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = acute_means / chronic_means
    out[chronic:] = np.where(chronic_means == 0.0, 0.0, ratio)
    return out


def ew_acwr_series(w, span_acute: int, span_chronic: int = CHRONIC_WINDOW) -> np.ndarray:
    acute_values = ewma_series(w, span_acute)
    chronic_values = ewma_series(w, span_chronic)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = acute_values / chronic_values
    return np.where(chronic_values == 0.0, 0.0, ratio)


# ---------------------------------------------------------------------------
# Load series construction


@dataclass
class LoadSeriesSet:
    """Dense per-(athlete, season) daily load arrays for every variable.

    Day 0 of each array is the season start; non-session days hold 0.
    """

    arrays: dict[tuple[str, int], dict[str, np.ndarray]]
    season_starts: dict[int, dt.date]
    season_lengths: dict[int, int]

    def series(self, athlete_id: str, season: int, variable: str) -> np.ndarray:
        return self.arrays[(athlete_id, season)][variable]


def _session_value(session, variable):
    if variable == "distance":
        return session.distance_m
    if variable == "msr":
        return session.msr_m
    if variable == "hsr":
        return session.hsr_m
    if variable == "srpe":
        return session.srpe
    if variable == "player_load":
        return session.player_load
    raise ValueError(f"unknown variable {variable!r}")


def build_load_series(sessions, season_starts: dict[int, dt.date] | None = None) -> LoadSeriesSet:
    """Accumulate daily load arrays from session records.

    Requires complete load values (impute missing session fields first, see
    preprocess.impute_session_values); a missing value propagates NaN into
    every window that touches its day.
    """
    if season_starts is None:
        season_starts = infer_season_starts(sessions)
    season_ends: dict[int, dt.date] = {}
    for s in sessions:
        if s.season not in season_ends or s.date > season_ends[s.season]:
            season_ends[s.season] = s.date
    season_lengths = {
        season: (season_ends[season] - season_starts[season]).days + 1
        for season in season_ends
    }
    arrays: dict[tuple[str, int], dict[str, np.ndarray]] = {}
    for s in sessions:
        key = (s.athlete_id, s.season)
        if key not in arrays:
            n = season_lengths[s.season]
            arrays[key] = {v: np.zeros(n) for v in VARIABLES}
        offset = (s.date - season_starts[s.season]).days
        if offset < 0:
            raise ValueError(f"session on {s.date} precedes season start")
        for variable in VARIABLES:
            value = _session_value(s, variable)
            day = arrays[key][variable]
            if value is None:
                day[offset] = np.nan
            elif not np.isnan(day[offset]):
                day[offset] += value
    return LoadSeriesSet(arrays, dict(season_starts), season_lengths)


# ---------------------------------------------------------------------------
# Feature matrix


@dataclass
class FeatureMatrix:
    """Named feature columns row-aligned with a DailyPanel.

    NaN entries mark features that could not be computed (insufficient
    history at the start of a season) and are left for imputation.
    """

    columns: list[str]
    values: np.ndarray

    def __len__(self) -> int:
        return self.values.shape[0]

    def column_index(self, name: str) -> int:
        return self.columns.index(name)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_index(name)]


def feature_columns() -> list[str]:
    """Stable column layout: 10 per variable + monotony/strain + age/session."""
    cols = []
    for variable in VARIABLES:
        for window in RA_WINDOWS:
            cols.append(f"{variable}_ra{window}")
        for span in EWMA_SPANS:
            cols.append(f"{variable}_ewma{span}")
        for acute in ACUTE_WINDOWS:
            cols.append(f"{variable}_acwr{acute}_{CHRONIC_WINDOW}")
        for span in ACUTE_WINDOWS:
            cols.append(f"{variable}_ewacwr{span}_{CHRONIC_WINDOW}")
    for variable in MONOTONY_VARIABLES:
        cols.append(f"{variable}_monotony7")
        cols.append(f"{variable}_strain7")
    cols.append("age_years")
    cols.append("is_match")
    return cols


def _variable_feature_table(w, cap: float) -> np.ndarray:
    """All 12 per-variable feature series stacked as columns (monotony last)."""
    cols = [rolling_average_series(w, window) for window in RA_WINDOWS]
    cols += [ewma_series(w, span) for span in EWMA_SPANS]
    cols += [acwr_series(w, acute) for acute in ACUTE_WINDOWS]
    cols += [ew_acwr_series(w, span) for span in ACUTE_WINDOWS]
    cols += [monotony7_series(w, cap=cap), strain7_series(w, cap=cap)]
    return np.column_stack(cols)


def build_feature_matrix(panel: DailyPanel, series_set: LoadSeriesSet,
                         monotony_cap: float = MONOTONY_CAP) -> FeatureMatrix:
    """Compute the full feature matrix for every panel row."""
    if panel.season_starts != series_set.season_starts:
        raise ValueError("panel and load series use different season starts")
    columns = feature_columns()
    n = len(panel)
    values = np.full((n, len(columns)), np.nan)

    # per-(athlete, season) cache of the stacked per-variable feature tables
    tables: dict[tuple[str, int], dict[str, np.ndarray]] = {}
    col_of = {name: j for j, name in enumerate(columns)}

    for i in range(n):
        key = (panel.athlete_ids[i], int(panel.seasons[i]))
        if key not in tables:
            if key not in series_set.arrays:
                raise ValueError(f"no load series for athlete-season {key}")
            tables[key] = {
                variable: _variable_feature_table(series_set.arrays[key][variable], monotony_cap)
                for variable in VARIABLES
            }
        day = int(panel.season_day[i])
        for variable in VARIABLES:
            table = tables[key][variable]
            if day >= table.shape[0]:
                raise ValueError(
                    f"panel day {day} outside load series span for {key}"
                )
            row = table[day]
            base = col_of[f"{variable}_ra{RA_WINDOWS[0]}"]
            values[i, base:base + 10] = row[:10]
            if variable in MONOTONY_VARIABLES:
                values[i, col_of[f"{variable}_monotony7"]] = row[10]
                values[i, col_of[f"{variable}_strain7"]] = row[11]
    values[:, col_of["age_years"]] = panel.age_years
    values[:, col_of["is_match"]] = panel.is_match.astype(float)
    return FeatureMatrix(columns, values)
