"""
Weather preparation: solar geometry, the Reindl diffuse-fraction split,
secondary-station infill and resampling to simulation time-steps.

The diffuse split uses the reduced (clearness-index only) Reindl correlation:

    fd = 1.020 - 0.248 kt          kt <= 0.3
    fd = 1.45  - 1.67  kt          0.3 < kt < 0.78
    fd = 0.147                     kt >= 0.78

The full three-predictor form needs temperature and humidity regressors and
is not implemented.

Solar geometry follows Cooper's declination, Spencer's eccentricity and
equation of time, and the solar-time hour angle:

    delta = 23.45 deg * sin(2 pi (284 + doy) / 365)
    cos(theta_z) = sin(phi) sin(delta) + cos(phi) cos(delta) cos(omega)
    G_0h = G_sc * E_0 * cos(theta_z)
"""

import logging
import os
from typing import Optional

import numpy as np
import pandas as pd
import pvlib

from .errors import DataError, WeatherError
from .models import Resolution, Site, SolarSplit, WeatherSeries, WEATHER_FIELDS, as_utc
from .timeseries import format_timestamps, infer_resolution, parse_timestamps

__all__ = [
    'SOLAR_CONSTANT',
    'solar_geometry',
    'reindl_split',
    'split_series',
    'infill_weather',
    'resample_weather',
    'read_weather_csv',
    'write_weather_csv',
    'synthetic_weather',
    'secondary_weather',
    'with_weather_gaps',
]

log = logging.getLogger('tempocal.weather')

SOLAR_CONSTANT = 1367.0

# the dni is zeroed below this zenith cosine
HORIZON_COSINE = 0.01

FD_MIN = 0.147


def solar_geometry(site: Site, timestamps) -> tuple[np.ndarray, np.ndarray]:
    """
    Returns the zenith cosine (clamped to [0, 1]) and the extraterrestrial
    horizontal irradiance (W/m2, zero at night) for every timestamp.
    """

    times = pd.DatetimeIndex(np.atleast_1d(pd.to_datetime(timestamps, utc=True)))
    doy = times.dayofyear.to_numpy()

    declination = pvlib.solarposition.declination_cooper69(doy)
    equation_of_time = pvlib.solarposition.equation_of_time_spencer71(doy)
    hour_angle = pvlib.solarposition.hour_angle(times, site.longitude, equation_of_time)

    zenith = pvlib.solarposition.solar_zenith_analytical(
        np.radians(site.latitude),
        np.radians(np.asarray(hour_angle, dtype=np.float64)),
        declination,
    )
    zenith_cosine = np.clip(np.cos(np.asarray(zenith, dtype=np.float64)), 0.0, 1.0)

    extraterrestrial = np.asarray(
        pvlib.irradiance.get_extra_radiation(doy, solar_constant=SOLAR_CONSTANT, method='spencer'),
        dtype=np.float64,
    )

    return zenith_cosine, extraterrestrial * zenith_cosine


def reindl_split(ghi, zenith_cosine, extraterrestrial_horizontal) -> SolarSplit:
    ghi = np.asarray(ghi, dtype=np.float64)
    zenith_cosine = np.asarray(zenith_cosine, dtype=np.float64)
    extraterrestrial_horizontal = np.asarray(extraterrestrial_horizontal, dtype=np.float64)

    daylight = (extraterrestrial_horizontal > 0) & (zenith_cosine > 0)
    with np.errstate(divide='ignore', invalid='ignore'):
        extraterrestrial_normal = np.where(daylight, extraterrestrial_horizontal / zenith_cosine, 0.0)
        kt = pvlib.irradiance.clearness_index(
            ghi,
            np.degrees(np.arccos(np.clip(zenith_cosine, 0.0, 1.0))),
            extraterrestrial_normal,
            min_cos_zenith=HORIZON_COSINE,
        )
    kt = np.where(daylight, kt, 0.0)

    fd = np.select(
        [kt <= 0.3, kt < 0.78],
        [1.020 - 0.248 * kt, 1.45 - 1.67 * kt],
        FD_MIN,
    )
    fd = np.clip(fd, FD_MIN, 1.0)

    dhi = fd * ghi
    with np.errstate(divide='ignore', invalid='ignore'):
        dni = np.where(zenith_cosine >= HORIZON_COSINE, (ghi - dhi) / zenith_cosine, 0.0)
    dni = np.maximum(dni, 0.0)

    return SolarSplit(dhi=dhi, dni=dni)


def split_series(weather: WeatherSeries) -> WeatherSeries:
    """Adds `dhi` and `dni` columns, evaluating the geometry at interval midpoints."""

    half_step = pd.Timedelta(seconds=weather.resolution.step_seconds / 2)
    zenith_cosine, extraterrestrial = solar_geometry(weather.site, weather.frame.index + half_step)
    split = reindl_split(np.nan_to_num(weather.column('ghi')), zenith_cosine, extraterrestrial)

    frame = weather.frame.copy()
    ghi_missing = frame['ghi'].isna().to_numpy()
    frame['dhi'] = np.where(ghi_missing, np.nan, split.dhi)
    frame['dni'] = np.where(ghi_missing, np.nan, split.dni)

    return WeatherSeries(weather.site, weather.resolution, frame, weather.provenance)


def infill_weather(primary: WeatherSeries, secondary: WeatherSeries) -> WeatherSeries:
    """
    Replaces missing primary fields with the secondary source's value at the
    same timestamp. Filled points are flagged in `provenance`.
    """

    if primary.resolution != secondary.resolution:
        raise WeatherError(f'resolution mismatch: {primary.resolution} vs {secondary.resolution}')

    index = primary.frame.index
    if not index.isin(secondary.frame.index).any():
        raise WeatherError('primary and secondary weather do not overlap')

    reference = secondary.frame.reindex(index)
    frame = primary.frame.copy()
    provenance = pd.DataFrame(False, index=index, columns=list(WEATHER_FIELDS))
    if primary.provenance is not None:
        provenance |= primary.provenance.reindex(index, fill_value=False)[list(WEATHER_FIELDS)]

    for field in WEATHER_FIELDS:
        take = frame[field].isna() & reference[field].notna()
        if take.any():
            frame.loc[take, field] = reference.loc[take, field]
            provenance[field] |= take

    remaining = frame[list(WEATHER_FIELDS)].isna()
    if remaining.to_numpy().any():
        rows, cols = np.nonzero(remaining.to_numpy())
        listing = ', '.join(
            f'{index[r].isoformat()} {WEATHER_FIELDS[c]}' for r, c in zip(rows[:10], cols[:10])
        )
        more = f' (+{len(rows) - 10} more)' if len(rows) > 10 else ''
        raise WeatherError(f'missing in both weather sources: {listing}{more}')

    filled = int(provenance.to_numpy().sum())
    if filled:
        log.info('filled %d weather values from the secondary source', filled)

    return WeatherSeries(primary.site, primary.resolution, frame, provenance)


def _circular_mean(degrees: np.ndarray, axis: int) -> np.ndarray:
    radians = np.radians(degrees)
    angle = np.degrees(np.arctan2(np.sin(radians).mean(axis=axis), np.cos(radians).mean(axis=axis)))
    return np.mod(angle, 360.0)


def resample_weather(weather: WeatherSeries, target: Resolution) -> WeatherSeries:
    """
    Averages weather over target intervals. Simulations never run coarser
    than hourly, so neither does their weather.
    """

    if target.is_calendar or target > Resolution.hourly:
        raise WeatherError('simulation weather capped at hourly')

    if target == weather.resolution:
        return weather

    if target < weather.resolution:
        raise WeatherError(f'cannot disaggregate {weather.resolution} weather into {target}')

    start = weather.start
    if int((start - start.normalize()).total_seconds()) % target.step_seconds:
        raise WeatherError(f'weather start {start} is not aligned to a {target} boundary')

    factor = target.step_seconds // weather.resolution.step_seconds
    n_out = len(weather) // factor
    if n_out * factor != len(weather):
        log.warning('dropping %d trailing weather steps that do not fill a %s interval',
                    len(weather) - n_out * factor, target)

    index = pd.date_range(start, periods=n_out, freq=target.pandas_freq)
    columns = {}
    for name in weather.frame.columns:
        block = weather.column(name)[:n_out * factor].reshape(n_out, factor)
        if name == 'wind_dir':
            columns[name] = _circular_mean(block, axis=1)
        else:
            columns[name] = block.mean(axis=1)

    provenance = None
    if weather.provenance is not None:
        flags = weather.provenance.to_numpy()[:n_out * factor]
        flags = flags.reshape(n_out, factor, flags.shape[1]).any(axis=1)
        provenance = pd.DataFrame(flags, index=index, columns=weather.provenance.columns)

    return WeatherSeries(weather.site, target, pd.DataFrame(columns, index=index), provenance)


def read_weather_csv(path: str | os.PathLike, site: Site, resolution: Optional[Resolution] = None) -> WeatherSeries:
    path = str(path)
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)

    expected = ['timestamp', *WEATHER_FIELDS]
    columns = list(frame.columns)
    if columns[:len(expected)] != expected or columns[len(expected):] not in ([], ['dhi', 'dni']):
        raise DataError(f'unexpected weather header "{",".join(columns)}"', path, 1)

    stamps = parse_timestamps(frame['timestamp'], path)
    resolution = infer_resolution(stamps, path, resolution)

    data = {}
    for name in columns[1:]:
        raw = frame[name].str.strip()
        empty = (raw == '').to_numpy()
        values = pd.to_numeric(raw.where(~empty), errors='coerce').to_numpy(dtype=np.float64)
        bad = np.flatnonzero(np.isnan(values) & ~empty)
        if len(bad):
            raise DataError(f'invalid {name} value {raw.iloc[bad[0]]!r}', path, int(bad[0]) + 2)
        data[name] = values

    try:
        return WeatherSeries(site, resolution, pd.DataFrame(data, index=stamps))
    except WeatherError as e:
        raise WeatherError(str(e), path) from e


def write_weather_csv(weather: WeatherSeries, path: str | os.PathLike) -> None:
    frame = weather.frame.copy()
    frame.insert(0, 'timestamp', format_timestamps(frame.index))
    frame.to_csv(path, index=False, na_rep='')


def _daily_walk(rng: np.random.Generator, days: int, t_days: np.ndarray, scale: float) -> np.ndarray:
    knots = rng.normal(0.0, scale, days + 1)
    return np.interp(t_days, np.arange(days + 1), knots)


def synthetic_weather(
    site: Site,
    start,
    days: int,
    seed: int,
    resolution: Resolution = Resolution.min1,
) -> WeatherSeries:
    """
    Generates a weather record with seasonal and diurnal temperature cycles,
    day-to-day weather fronts and clear-sky irradiance attenuated by clouds.
    """

    rng = np.random.default_rng(seed)
    start = as_utc(start)
    n = days * resolution.steps_per_day
    index = pd.date_range(start, periods=n, freq=resolution.pandas_freq)

    t_days = np.arange(n) * resolution.step_seconds / 86400.0
    doy = index.dayofyear.to_numpy()
    hour = (index.hour + index.minute / 60.0).to_numpy()

    clearness = np.clip(0.6 + _daily_walk(rng, days, t_days, 0.3), 0.05, 1.0)

    seasonal = 9.5 - 10.5 * np.cos(2.0 * np.pi * (doy - 20) / 365.25)
    diurnal = (2.0 + 4.0 * clearness) * np.sin(2.0 * np.pi * (hour - 9.0) / 24.0)
    dry_bulb = seasonal + diurnal + _daily_walk(rng, days, t_days, 3.0) + rng.normal(0.0, 0.1, n)

    depression = np.maximum(1.5 + 6.0 * clearness + rng.normal(0.0, 0.3, n), 0.5)
    dew_point = dry_bulb - depression

    def saturation(temperature):
        return np.exp(17.625 * temperature / (243.04 + temperature))

    rh = np.clip(100.0 * saturation(dew_point) / saturation(dry_bulb), 0.0, 100.0)

    pressure = 96500.0 + 800.0 * _daily_walk(rng, days, t_days, 1.0) + rng.normal(0.0, 5.0, n)
    wind_speed = np.maximum(2.5 + _daily_walk(rng, days, t_days, 1.5) + rng.normal(0.0, 0.4, n), 0.0)
    wind_dir = np.mod(240.0 + 50.0 * _daily_walk(rng, days, t_days, 1.0) + rng.normal(0.0, 10.0, n), 360.0)

    half_step = pd.Timedelta(seconds=resolution.step_seconds / 2)
    zenith_cosine, _ = solar_geometry(site, index + half_step)
    zenith = pd.Series(np.degrees(np.arccos(zenith_cosine)), index=index)
    clear_sky = pvlib.clearsky.haurwitz(zenith)['ghi'].to_numpy(dtype=np.float64)

    flicker = 1.0 - 0.4 * (1.0 - clearness) * rng.random(n)
    ghi = np.maximum(clear_sky * (0.2 + 0.8 * clearness) * flicker, 0.0)

    frame = pd.DataFrame({
        'dry_bulb': dry_bulb,
        'dew_point': dew_point,
        'rh': rh,
        'pressure': pressure,
        'wind_speed': wind_speed,
        'wind_dir': wind_dir,
        'ghi': ghi,
    }, index=index)

    return WeatherSeries(site, resolution, frame)


def secondary_weather(primary: WeatherSeries, seed: int) -> WeatherSeries:
    """A nearby-station copy of `primary` with independent sensor noise."""

    rng = np.random.default_rng(seed)
    frame = primary.frame[list(WEATHER_FIELDS)].copy()
    n = len(frame)

    frame['dry_bulb'] += rng.normal(0.0, 0.3, n)
    frame['dew_point'] = np.minimum(frame['dew_point'] + rng.normal(0.0, 0.3, n), frame['dry_bulb'])
    frame['rh'] = np.clip(frame['rh'] + rng.normal(0.0, 1.5, n), 0.0, 100.0)
    frame['pressure'] += rng.normal(0.0, 20.0, n)
    frame['wind_speed'] = np.maximum(frame['wind_speed'] * (1.0 + rng.normal(0.0, 0.1, n)), 0.0)
    frame['wind_dir'] = np.mod(frame['wind_dir'] + rng.normal(0.0, 8.0, n), 360.0)
    frame['ghi'] = np.maximum(frame['ghi'] * (1.0 + rng.normal(0.0, 0.05, n)), 0.0)

    return WeatherSeries(primary.site, primary.resolution, frame)


def with_weather_gaps(weather: WeatherSeries, seed: int, n_gaps: int = 5, max_steps: int = 120,
                      fields: Optional[tuple[str, ...]] = None) -> WeatherSeries:
    """Blanks `n_gaps` random runs of up to `max_steps` in random fields."""

    rng = np.random.default_rng(seed)
    fields = fields or WEATHER_FIELDS
    frame = weather.frame.copy()
    n = len(frame)

    for _ in range(n_gaps):
        field = fields[rng.integers(len(fields))]
        length = int(rng.integers(1, max_steps + 1))
        if length >= n:
            continue
        begin = int(rng.integers(0, n - length))
        frame.iloc[begin:begin + length, frame.columns.get_loc(field)] = np.nan

    return WeatherSeries(weather.site, weather.resolution, frame, weather.provenance)
