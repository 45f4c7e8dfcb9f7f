from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from ..errors import DataError
from .common import Channel, Resolution

__all__ = [
    'MeteredSeries',
    'AlignedPair',
    'DailyMatrix',
    'as_utc',
    'timestamps_for',
]


def as_utc(timestamp) -> pd.Timestamp:
    ts = pd.Timestamp(timestamp)
    if ts.tzinfo is None:
        return ts.tz_localize('UTC')
    return ts.tz_convert('UTC')


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def timestamps_for(start: pd.Timestamp, resolution: Resolution, n: int) -> pd.DatetimeIndex:
    return pd.date_range(start, periods=n, freq=resolution.pandas_freq)


@dataclass(frozen=True, eq=False)
class MeteredSeries:
    """
    Uniformly sampled interval energies (kWh per step) of one metered channel.
    Missing points are NaN in `values` and True in `missing`.
    """

    channel: Channel
    start: pd.Timestamp
    resolution: Resolution
    values: np.ndarray
    missing: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if self.missing is None:
            missing = np.isnan(values)
        else:
            missing = np.array(self.missing, dtype=bool) | np.isnan(values)

        if values.ndim != 1 or values.shape != missing.shape:
            raise DataError(f'{self.channel}: values and missing mask must be 1-d arrays of equal length')

        values[missing] = np.nan
        if np.any(values[~missing] < 0):
            raise DataError(f'{self.channel}: energy values must be non-negative')

        start = as_utc(self.start)
        if self.resolution.is_calendar and (start.day != 1 or start != start.normalize()):
            raise DataError(f'{self.channel}: monthly series must start at a month boundary')

        object.__setattr__(self, 'start', start)
        object.__setattr__(self, 'values', _frozen(values))
        object.__setattr__(self, 'missing', _frozen(missing))

    def __len__(self) -> int:
        return len(self.values)

    def timestamps(self) -> pd.DatetimeIndex:
        return timestamps_for(self.start, self.resolution, len(self))

    @property
    def end(self) -> pd.Timestamp:
        """Exclusive end of the covered span."""
        if self.resolution.is_calendar:
            return self.start + pd.DateOffset(months=len(self))
        return self.start + pd.Timedelta(seconds=self.resolution.step_seconds * len(self))

    @property
    def n_missing(self) -> int:
        return int(self.missing.sum())

    def total(self) -> float:
        return float(np.nansum(self.values))

    def observed(self) -> np.ndarray:
        return self.values[~self.missing]

    def with_values(self, values: np.ndarray, missing: Optional[np.ndarray] = None) -> 'MeteredSeries':
        return MeteredSeries(self.channel, self.start, self.resolution, values, missing)

    def to_series(self) -> pd.Series:
        return pd.Series(self.values, index=self.timestamps(), name=str(self.channel))


@dataclass(frozen=True)
class AlignedPair:
    measured: np.ndarray
    simulated: np.ndarray
    count: int

    def __post_init__(self):
        if len(self.measured) != len(self.simulated) or len(self.measured) != self.count:
            raise DataError('aligned arrays must have equal length')


@dataclass(frozen=True, eq=False)
class DailyMatrix:
    """
    Days x steps-per-day view of a series. Days containing a missing value are
    flagged in `excluded` and left out of `rows`.
    """

    values: np.ndarray
    excluded: np.ndarray
    start: pd.Timestamp
    resolution: Resolution
    channel: Optional[Channel] = None

    @property
    def n_days(self) -> int:
        return self.values.shape[0]

    @property
    def steps_per_day(self) -> int:
        return self.values.shape[1]

    @property
    def rows(self) -> np.ndarray:
        return self.values[~self.excluded]

    @property
    def day_index(self) -> np.ndarray:
        return np.flatnonzero(~self.excluded)

    def dates(self) -> pd.DatetimeIndex:
        return pd.date_range(self.start, periods=self.n_days, freq='D')
