"""
Interval-energy series operations: aggregation, gap infill, measured/simulated
alignment, daily reshaping and CSV ingestion.
"""

import logging
import os
from typing import Optional

import numpy as np
import pandas as pd

from .errors import AlignmentError, DataError, ResolutionError
from .models import (
    AlignedPair,
    Channel,
    DailyMatrix,
    MeteredSeries,
    Resolution,
    timestamps_for,
)

__all__ = [
    'DEFAULT_MAX_GAP_SECONDS',
    'aggregate',
    'mean_aggregate',
    'infill_linear',
    'find_gaps',
    'align',
    'reshape_daily',
    'read_series_csv',
    'write_series_csv',
    'format_timestamps',
    'parse_timestamps',
    'infer_resolution',
]

log = logging.getLogger('tempocal.timeseries')

DEFAULT_MAX_GAP_SECONDS = 3 * 3600


def _check_alignment(start: pd.Timestamp, target: Resolution) -> None:
    if target.is_calendar:
        if start.day != 1 or start != start.normalize():
            raise ResolutionError(f'series start {start} is not aligned to a calendar month')
        return

    offset = int((start - start.normalize()).total_seconds())
    if offset % target.step_seconds != 0:
        raise ResolutionError(f'series start {start} is not aligned to a {target.label} boundary')


def _interval_groups(start: pd.Timestamp, source: Resolution, n: int, target: Resolution) -> tuple[np.ndarray, int]:
    """
    Maps every source step to the index of the target interval covering it.
    Steps of a trailing partial fixed-length interval map to -1.
    """

    if target.is_calendar:
        stamps = timestamps_for(start, source, n)
        months = np.asarray(stamps.year * 12 + stamps.month, dtype=np.int64)
        groups = months - months[0]
        return groups, int(groups[-1]) + 1

    if target.step_seconds % source.step_seconds != 0:
        raise ResolutionError(f'{source.label} steps do not nest in {target.label} intervals')

    factor = target.step_seconds // source.step_seconds
    n_out = n // factor
    groups = np.arange(n, dtype=np.int64) // factor
    groups[n_out * factor:] = -1
    return groups, n_out


def _check_target(series_resolution: Resolution, target: Resolution) -> None:
    if target < series_resolution:
        raise ResolutionError(f'cannot disaggregate {series_resolution.label} into {target.label}')

    if series_resolution.is_calendar:
        raise ResolutionError('monthly series cannot be aggregated further')


def aggregate(series: MeteredSeries, target: Resolution) -> MeteredSeries:
    """
    Sums interval energies into coarser intervals. An output interval is
    missing as soon as any covered input step is missing.
    """

    if target == series.resolution:
        return series

    _check_target(series.resolution, target)
    _check_alignment(series.start, target)

    if len(series) == 0:
        return MeteredSeries(series.channel, series.start, target, np.empty(0))

    groups, n_out = _interval_groups(series.start, series.resolution, len(series), target)
    keep = groups >= 0
    dropped = len(series) - int(keep.sum())
    if dropped:
        log.warning('%s: dropping %d trailing %s steps that do not fill a %s interval',
                    series.channel, dropped, series.resolution, target)

    values = np.where(series.missing, 0.0, series.values)[keep]
    sums = np.bincount(groups[keep], weights=values, minlength=n_out)
    missing = np.bincount(groups[keep], weights=series.missing[keep].astype(np.float64), minlength=n_out) > 0
    sums[missing] = np.nan

    return MeteredSeries(series.channel, series.start, target, sums, missing)


def mean_aggregate(values: np.ndarray, start: pd.Timestamp, source: Resolution, target: Resolution) -> np.ndarray:
    """Interval means of an intensive quantity, grouped like `aggregate`."""

    values = np.asarray(values, dtype=np.float64)
    if target == source:
        return values.copy()

    _check_target(source, target)
    groups, n_out = _interval_groups(start, source, len(values), target)
    keep = groups >= 0
    sums = np.bincount(groups[keep], weights=values[keep], minlength=n_out)
    counts = np.bincount(groups[keep], minlength=n_out)
    return sums / counts


def _missing_runs(mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    padded = np.concatenate(([0], mask.astype(np.int8), [0]))
    edges = np.diff(padded)
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    return starts, ends - starts


def infill_linear(series: MeteredSeries, max_gap_seconds: int = DEFAULT_MAX_GAP_SECONDS) -> MeteredSeries:
    """
    Fills interior gaps no longer than `max_gap_seconds` by linear
    interpolation between the bounding observations. Longer gaps and
    leading/trailing gaps stay missing.
    """

    if series.resolution.is_calendar:
        raise ResolutionError('gap infill needs a fixed-step series')

    observed = ~series.missing
    n_observed = int(observed.sum())
    if n_observed == 0:
        raise DataError(f'{series.channel}: series is entirely missing')
    if n_observed < 2:
        raise DataError(f'{series.channel}: at least two observed values are needed for interpolation')

    n = len(series)
    step = series.resolution.step_seconds
    fill = np.zeros(n, dtype=bool)
    for start, length in zip(*_missing_runs(series.missing)):
        if start == 0 or start + length == n:
            continue
        if length * step > max_gap_seconds:
            continue
        fill[start:start + length] = True

    if not fill.any():
        return series

    x = np.flatnonzero(observed)
    values = series.values.copy()
    values[fill] = np.interp(np.flatnonzero(fill), x, series.values[observed])

    return series.with_values(values, series.missing & ~fill)


def find_gaps(series: MeteredSeries) -> list[tuple[pd.Timestamp, int]]:
    """Missing runs as (start timestamp, duration in seconds)."""

    if series.resolution.is_calendar:
        raise ResolutionError('gap listing needs a fixed-step series')

    step = series.resolution.step_seconds
    starts, lengths = _missing_runs(series.missing)
    stamps = series.timestamps()
    return [(stamps[s], int(length) * step) for s, length in zip(starts, lengths)]


def align(measured: MeteredSeries, simulated: MeteredSeries) -> AlignedPair:
    if measured.channel != simulated.channel:
        raise AlignmentError(f'channel mismatch: {measured.channel} vs {simulated.channel}')
    if measured.resolution != simulated.resolution:
        raise AlignmentError(f'resolution mismatch: {measured.resolution} vs {simulated.resolution}')
    if measured.start != simulated.start:
        raise AlignmentError(f'start mismatch: {measured.start} vs {simulated.start}')
    if len(measured) != len(simulated):
        raise AlignmentError(f'length mismatch: {len(measured)} vs {len(simulated)}')

    keep = ~measured.missing
    count = int(keep.sum())
    if count == 0:
        raise AlignmentError(f'{measured.channel}: empty alignment')

    return AlignedPair(measured.values[keep], simulated.values[keep], count)


def reshape_daily(series: MeteredSeries) -> DailyMatrix:
    if series.resolution.is_calendar or series.resolution >= Resolution.daily:
        raise ResolutionError(f'daily profiles need a resolution finer than daily, got {series.resolution}')

    if series.start != series.start.normalize():
        raise DataError(f'{series.channel}: daily reshaping needs a series starting at midnight')

    steps = series.resolution.steps_per_day
    if len(series) == 0 or len(series) % steps != 0:
        raise DataError(f'{series.channel}: partial-day series ({len(series)} steps, {steps} per day)')

    values = series.values.reshape(-1, steps).copy()
    excluded = series.missing.reshape(-1, steps).any(axis=1)

    return DailyMatrix(values, excluded, series.start, series.resolution, series.channel)


def format_timestamps(index: pd.DatetimeIndex) -> pd.Index:
    return index.tz_convert('UTC').strftime('%Y-%m-%dT%H:%M:%SZ')


def parse_timestamps(raw: pd.Series, path: str) -> pd.DatetimeIndex:
    stamps = pd.to_datetime(raw, utc=True, errors='coerce', format='ISO8601')
    bad = np.flatnonzero(stamps.isna().to_numpy())
    if len(bad):
        raise DataError(f'invalid timestamp {raw.iloc[bad[0]]!r}', path, int(bad[0]) + 2)
    return pd.DatetimeIndex(stamps)


def infer_resolution(stamps: pd.DatetimeIndex, path: str, expected: Optional[Resolution] = None) -> Resolution:
    """
    The sampling interval of `stamps`. With `expected` a single row is
    accepted as is and longer files must match it.
    """

    if len(stamps) == 0:
        raise DataError('no rows', path, 2)

    if len(stamps) < 2:
        if expected is None:
            raise DataError('at least two rows are needed to infer the sampling interval', path)
        return expected

    resolution = _infer_step(stamps, path)
    if expected is not None and resolution is not expected:
        raise ResolutionError(f'expected {expected} data, found {resolution}', path)
    return resolution


def _infer_step(stamps: pd.DatetimeIndex, path: str) -> Resolution:

    deltas = np.diff(stamps.asi8) // 10**9
    step = int(deltas[0])
    irregular = np.flatnonzero(deltas != step)

    if not len(irregular):
        try:
            return Resolution.from_step(step)
        except ValueError:
            raise DataError(f'unsupported sampling interval of {step} s', path, 3) from None

    # calendar months
    months = np.asarray(stamps.year * 12 + stamps.month)
    is_month_start = (stamps.day == 1) & (stamps == stamps.normalize())
    if is_month_start.all() and np.all(np.diff(months) == 1):
        return Resolution.monthly

    raise DataError(f'non-uniform sampling interval ({int(deltas[irregular[0]])} s instead of {step} s)',
                    path, int(irregular[0]) + 3)


def read_series_csv(path: str | os.PathLike, channel: Channel, resolution: Optional[Resolution] = None) -> MeteredSeries:
    """
    Reads a `timestamp,value` CSV. Empty values are missing; the sampling
    interval must be uniform. Pass `resolution` when it is known, a
    one-row file cannot reveal it.
    """

    path = str(path)
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    if list(frame.columns) != ['timestamp', 'value']:
        raise DataError(f'expected header "timestamp,value", got "{",".join(frame.columns)}"', path, 1)

    stamps = parse_timestamps(frame['timestamp'], path)
    resolution = infer_resolution(stamps, path, resolution)

    raw = frame['value'].str.strip()
    empty = (raw == '').to_numpy()
    values = pd.to_numeric(raw.where(~empty), errors='coerce').to_numpy(dtype=np.float64)

    bad = np.flatnonzero(np.isnan(values) & ~empty)
    if len(bad):
        raise DataError(f'invalid value {raw.iloc[bad[0]]!r}', path, int(bad[0]) + 2)

    negative = np.flatnonzero(values < 0)
    if len(negative):
        raise DataError(f'negative energy value {values[negative[0]]}', path, int(negative[0]) + 2)

    return MeteredSeries(channel, stamps[0], resolution, values, empty)


def write_series_csv(series: MeteredSeries, path: str | os.PathLike) -> None:
    frame = pd.DataFrame({
        'timestamp': format_timestamps(series.timestamps()),
        'value': series.values,
    })
    frame.to_csv(path, index=False, na_rep='')
