"""Trend indicators over feature series: EMA trend, running lower limit, MAACD.

MAACD (moving average and amplitude convergence/divergence) is the elevation
of an exponential moving average above its own running minimum:

    T(t) = a*f(t) + (1-a)*T(t-1),  a = 2/(w+1),  T(1) = f(1)
    L(t) = min T over the previous p steps including t
    M(t) = T(t) - L(t)   (>= 0 because L's window includes t)

Defaults w=7, p=27 are counted in windows (5 s hop -> 135 s of history).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import lfilter

DEFAULT_TREND_SPAN = 7
DEFAULT_MIN_WINDOW = 27


class EmptySeriesError(Exception):
    """Indicator applied to a series with no values."""


@dataclass
class FeatureSeries:
    """Time-indexed scalar feature, e.g. ``strength:T7-P7`` at window end times."""

    feature_id: str
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.times.shape != self.values.shape:
            raise ValueError(
                f"{self.feature_id}: times {self.times.shape} vs values "
                f"{self.values.shape}"
            )


def _require_values(series: FeatureSeries):
    if len(series.values) == 0:
        raise EmptySeriesError(f"{series.feature_id}: empty series")


def ema_trend(series: FeatureSeries, w: int = DEFAULT_TREND_SPAN) -> FeatureSeries:
    """Exponential moving average with weight 2/(w+1), seeded at the first value."""
    if w < 1:
        raise ValueError(f"trend span must be >= 1, got {w}")
    _require_values(series)
    alpha = 2.0 / (w + 1.0)
    v = series.values
    # y[t] = alpha*x[t] + (1-alpha)*y[t-1], with y[0] = x[0] via the initial state
    trend, _ = lfilter([alpha], [1.0, alpha - 1.0], v, zi=[(1.0 - alpha) * v[0]])
    return FeatureSeries(f"trend:{series.feature_id}", series.times, trend)


def rolling_min(series: FeatureSeries, p: int = DEFAULT_MIN_WINDOW) -> FeatureSeries:
    """Minimum over the trailing p+1 points (truncated at the start of history)."""
    if p < 0:
        raise ValueError(f"window must be >= 0, got {p}")
    _require_values(series)
    v = series.values
    head = np.minimum.accumulate(v[: min(p, len(v))])
    if len(v) > p:
        tail = sliding_window_view(v, p + 1).min(axis=1)
        low = np.concatenate([head, tail])
    else:
        low = head
    return FeatureSeries(f"lowlim:{series.feature_id}", series.times, low)


def maacd(
    series: FeatureSeries,
    w: int = DEFAULT_TREND_SPAN,
    p: int = DEFAULT_MIN_WINDOW,
) -> FeatureSeries:
    """Trend minus its running lower limit; nonnegative by construction."""
    trend = ema_trend(series, w)
    low = rolling_min(trend, p)
    return FeatureSeries(
        f"maacd:{series.feature_id}", series.times, trend.values - low.values
    )


def write_feature_csv(series_list: list[FeatureSeries], path) -> None:
    """Shared feature dump: feature_id,end_s,value."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["feature_id", "end_s", "value"])
        for series in series_list:
            for t, v in zip(series.times, series.values):
                writer.writerow([series.feature_id, repr(float(t)), repr(float(v))])


def read_feature_csv(path) -> list[FeatureSeries]:
    by_id: dict[str, tuple[list[float], list[float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["feature_id", "end_s", "value"]:
            raise ValueError(f"{path}: not a feature CSV")
        for row in reader:
            if not row:
                continue
            times, values = by_id.setdefault(row[0], ([], []))
            times.append(float(row[1]))
            values.append(float(row[2]))
    return [
        FeatureSeries(fid, np.asarray(t), np.asarray(v))
        for fid, (t, v) in by_id.items()
    ]
