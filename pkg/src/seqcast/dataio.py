"""Ingestion and preparation of state-wise daily case series.

CSV schema (UTF-8, header required): columns ``date,region,new_cases`` with
ISO-8601 dates.  Rows may arrive unsorted; the loader sorts by (region, date)
and requires one row per consecutive calendar day per region.  ``new_cases``
is a non-negative integer, except in cumulative mode where the column carries
running totals (differencing may then produce negative corrections, cleaned
downstream).
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field

import numpy as np


class DataError(ValueError):
    """Malformed input file or series request that cannot be satisfied."""


@dataclass(frozen=True)
class DailySeries:
    """One region's daily new-case counts, one value per consecutive day."""

    region: str
    start_date: dt.date
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size == 0:
            raise DataError(f"{self.region}: series must be a non-empty 1-D array")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size

    @property
    def end_date(self) -> dt.date:
        return self.start_date + dt.timedelta(days=len(self) - 1)

    def date_of(self, index: int) -> dt.date:
        return self.start_date + dt.timedelta(days=int(index))

    def slice_dates(self, start: dt.date | None, end: dt.date | None) -> "DailySeries":
        """Restrict to [start, end] inclusive; endpoints default to the data range."""
        start = start or self.start_date
        end = end or self.end_date
        if start < self.start_date or end > self.end_date or start > end:
            raise DataError(
                f"{self.region}: requested window {start}..{end} outside data "
                f"range {self.start_date}..{self.end_date}")
        a = (start - self.start_date).days
        b = (end - self.start_date).days + 1
        return DailySeries(self.region, start, self.values[a:b])


@dataclass(frozen=True)
class NormalizedSeries:
    """A series scaled into [0, 1] by its own maximum (scale, in cases/day)."""

    base: DailySeries
    scale: float
    normalized: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.normalized is None:
            object.__setattr__(self, "normalized", self.base.values / self.scale)

    @property
    def region(self) -> str:
        return self.base.region

    @property
    def start_date(self) -> dt.date:
        return self.base.start_date

    def denormalize(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values) * self.scale


@dataclass(frozen=True)
class RegionGroup:
    """Forecast target plus the neighbour states used as extra features."""

    target: str
    neighbors: tuple[str, ...]

    @property
    def members(self) -> tuple[str, ...]:
        return (self.target,) + tuple(self.neighbors)


# Feature groupings for the two state-level multivariate cases.
MAHARASHTRA_GROUP = RegionGroup("Maharashtra",
                                ("Gujarat", "Madhya Pradesh", "Uttar Pradesh"))
DELHI_GROUP = RegionGroup("Delhi", ("Rajasthan", "Uttar Pradesh", "Haryana"))
NAMED_GROUPS = {"maharashtra": MAHARASHTRA_GROUP, "delhi": DELHI_GROUP}


def all_states_group(series: dict[str, DailySeries], target: str) -> RegionGroup:
    """Target plus every other region, in fixed alphabetical order."""
    rest = sorted(name for name in series if name != target)
    return RegionGroup(target, tuple(rest))


def load_csv(path, cumulative: bool = False) -> dict[str, DailySeries]:
    """Parse a daily-cases CSV into one DailySeries per region.

    In cumulative mode the value column carries running totals which are
    differenced (first day keeps its total as the initial count).
    """
    rows: dict[str, dict[dt.date, float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        try:
            i_date = header.index("date")
            i_region = header.index("region")
            i_value = header.index("new_cases")
        except ValueError:
            raise DataError(
                f"{path}: header must contain date,region,new_cases "
                f"(got {header})") from None
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} "
                                f"columns, got {len(row)}")
            try:
                date = dt.date.fromisoformat(row[i_date].strip())
            except ValueError:
                raise DataError(
                    f"{path}:{lineno}: bad date {row[i_date]!r}") from None
            region = row[i_region].strip()
            if not region:
                raise DataError(f"{path}:{lineno}: empty region name")
            try:
                value = int(row[i_value].strip())
            except ValueError:
                raise DataError(
                    f"{path}:{lineno}: bad case count {row[i_value]!r}") from None
            if value < 0 and not cumulative:
                raise DataError(
                    f"{path}:{lineno}: negative new_cases {value} "
                    "(only valid with cumulative ingestion)")
            per_region = rows.setdefault(region, {})
            if date in per_region:
                raise DataError(
                    f"{path}:{lineno}: duplicate row for ({date}, {region})")
            per_region[date] = float(value)

    if not rows:
        raise DataError(f"{path}: no data rows")

    out: dict[str, DailySeries] = {}
    for region in sorted(rows):
        dates = sorted(rows[region])
        for prev, cur in zip(dates, dates[1:]):
            if (cur - prev).days != 1:
                missing = prev + dt.timedelta(days=1)
                raise DataError(
                    f"{path}: region {region} missing date {missing} "
                    f"(gap between {prev} and {cur})")
        values = np.array([rows[region][d] for d in dates], dtype=np.float64)
        if cumulative:
            values = np.diff(values, prepend=0.0)
        out[region] = DailySeries(region, dates[0], values)
    return out


def clean_negatives(s: DailySeries) -> DailySeries:
    """Clamp negative daily values (cumulative-feed corrections) to zero."""
    return DailySeries(s.region, s.start_date, np.maximum(s.values, 0.0))


def rolling_mean(s: DailySeries, window: int) -> DailySeries:
    """Trailing mean over `window` days; the first window-1 outputs average
    the available prefix only, so no future value ever leaks backwards."""
    if window < 1:
        raise DataError(f"rolling window must be >= 1, got {window}")
    n = len(s)
    csum = np.concatenate(([0.0], np.cumsum(s.values)))
    idx = np.arange(n)
    lo = np.maximum(idx - window + 1, 0)
    out = (csum[idx + 1] - csum[lo]) / (idx + 1 - lo)
    return DailySeries(s.region, s.start_date, out)


def normalize_max(s: DailySeries) -> NormalizedSeries:
    """Divide by the series maximum over the entire data; records the scale."""
    scale = float(np.max(s.values))
    if scale <= 0:
        raise DataError(f"{s.region}: cannot normalize, series maximum is {scale}")
    return NormalizedSeries(base=s, scale=scale)


def prepare_series(raw: DailySeries, smooth_window: int = 3,
                   start: dt.date | None = None,
                   end: dt.date | None = None) -> NormalizedSeries:
    """Clean, restrict, smooth, then max-normalize one region's series."""
    s = clean_negatives(raw).slice_dates(start, end)
    return normalize_max(rolling_mean(s, smooth_window))


def build_multivariate(group: RegionGroup,
                       series: dict[str, NormalizedSeries]) -> np.ndarray:
    """Stack group members as columns (time x F); column 0 is the target."""
    cols = []
    length = None
    start = None
    for name in group.members:
        if name not in series:
            raise DataError(f"multivariate group member {name!r} not found "
                            f"in ingested regions {sorted(series)}")
        ns = series[name]
        if length is None:
            length, start = len(ns.normalized), ns.start_date
        elif len(ns.normalized) != length or ns.start_date != start:
            raise DataError(
                f"region {name!r} misaligned with {group.target!r}: "
                f"{len(ns.normalized)} days from {ns.start_date} vs "
                f"{length} days from {start}")
        cols.append(ns.normalized)
    return np.column_stack(cols)


def _month_window(month_start: dt.date) -> tuple[dt.date, dt.date]:
    # Ranking taken at `month_start` covers the preceding calendar month.
    end = month_start.replace(day=1) - dt.timedelta(days=1)
    return end.replace(day=1), end


def monthly_rank(series: dict[str, DailySeries], month_start: dt.date,
                 top_k: int) -> list[tuple[str, float]]:
    """Regions ranked by total novel cases over the month preceding
    `month_start`; ties break alphabetically."""
    first, last = _month_window(month_start)
    totals = []
    for region in sorted(series):
        s = series[region]
        if s.start_date > first or s.end_date < last:
            raise DataError(
                f"month {first:%Y-%m} not covered by region {region} "
                f"({s.start_date}..{s.end_date})")
        a = (first - s.start_date).days
        b = (last - s.start_date).days + 1
        totals.append((region, float(np.sum(s.values[a:b]))))
    totals.sort(key=lambda item: (-item[1], item[0]))
    return totals[:top_k]


def weekly_average(s: DailySeries) -> np.ndarray:
    """Means of non-overlapping 7-day blocks from the series start;
    a trailing partial week is dropped."""
    n_blocks = len(s) // 7
    if n_blocks == 0:
        raise DataError(
            f"{s.region}: need at least 7 days for weekly averages, have {len(s)}")
    return s.values[:n_blocks * 7].reshape(n_blocks, 7).mean(axis=1)


def series_sha256(path) -> str:
    import hashlib

    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()
