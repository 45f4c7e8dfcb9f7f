from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from ..errors import WeatherError
from .common import Resolution
from .series import as_utc, timestamps_for

__all__ = [
    'Site',
    'WeatherSeries',
    'SolarSplit',
    'WEATHER_FIELDS',
]

WEATHER_FIELDS = (
    'dry_bulb',
    'dew_point',
    'rh',
    'pressure',
    'wind_speed',
    'wind_dir',
    'ghi',
)


@dataclass(frozen=True)
class Site:
    latitude: float
    longitude: float

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise WeatherError(f'latitude out of range: {self.latitude}')
        if not -180.0 <= self.longitude <= 180.0:
            raise WeatherError(f'longitude out of range: {self.longitude}')


@dataclass(frozen=True)
class SolarSplit:
    dhi: np.ndarray
    dni: np.ndarray


@dataclass(frozen=True, eq=False)
class WeatherSeries:
    """
    Per-step weather records. `frame` is indexed by the step timestamps and
    holds one column per field in WEATHER_FIELDS (NaN = missing), optionally
    followed by the derived `dhi` and `dni` columns.
    `provenance` marks values taken from a secondary source.
    """

    site: Site
    resolution: Resolution
    frame: pd.DataFrame
    provenance: Optional[pd.DataFrame] = None

    def __post_init__(self):
        missing = [f for f in WEATHER_FIELDS if f not in self.frame.columns]
        if missing:
            raise WeatherError(f'weather is missing fields: {", ".join(missing)}')

        if self.resolution.is_calendar or self.resolution > Resolution.hourly:
            raise WeatherError('simulation weather capped at hourly')

        frame = self.frame.copy()
        frame.index = timestamps_for(as_utc(frame.index[0]), self.resolution, len(frame))

        ghi = frame['ghi'].to_numpy()
        if np.any(ghi[~np.isnan(ghi)] < 0):
            raise WeatherError('ghi must be non-negative')

        rh = frame['rh'].to_numpy()
        rh = rh[~np.isnan(rh)]
        if np.any((rh < 0) | (rh > 100)):
            raise WeatherError('relative humidity must lie in [0, 100]')

        object.__setattr__(self, 'frame', frame)

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def start(self) -> pd.Timestamp:
        return self.frame.index[0]

    @property
    def end(self) -> pd.Timestamp:
        return self.start + pd.Timedelta(seconds=self.resolution.step_seconds * len(self))

    @property
    def has_split(self) -> bool:
        return 'dhi' in self.frame.columns and 'dni' in self.frame.columns

    def column(self, name: str) -> np.ndarray:
        return self.frame[name].to_numpy(dtype=np.float64)

    def window(self, start: pd.Timestamp, end: pd.Timestamp) -> 'WeatherSeries':
        start, end = as_utc(start), as_utc(end)
        if start < self.start or end > self.end or start >= end:
            raise WeatherError(f'weather covers [{self.start}, {self.end}), requested [{start}, {end})')

        frame = self.frame.loc[(self.frame.index >= start) & (self.frame.index < end)]
        provenance = None
        if self.provenance is not None:
            provenance = self.provenance.loc[frame.index]
        return WeatherSeries(self.site, self.resolution, frame, provenance)
