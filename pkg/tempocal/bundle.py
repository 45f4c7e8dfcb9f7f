"""
The prepared data bundle: infilled and aggregated measurements, weather
files for every simulation time-step and per-resolution schedules.

    measurements/<resolution>/<channel>.csv
    weather/<resolution>.csv          min1 .. hourly
    schedules/<resolution>/           mined up to hour6, nominal beyond
    manifest.json
"""

import logging
import os
from pathlib import Path
from typing import Optional

import numpy as np
from packaging.version import Version

from ._version import __version__
from .config import TempocalConfig
from .dynamic import Dynamic
from .errors import DataError, ResolutionError, ScheduleError, WeatherError
from .models import WEATHER_FIELDS, Channel, DailyMatrix, MeteredSeries, Resolution, Role, Site, WeatherSeries
from .profiles import (
    ELECTRIC_ROLES,
    RoleSchedule,
    ScheduleSet,
    build_schedules,
    nominal_schedule_set,
    read_schedules,
    write_schedules,
)
from .session import MANIFEST_FILENAME, RunSession, announce
from .timeseries import aggregate, find_gaps, infill_linear, read_series_csv, reshape_daily, write_series_csv
from .util import md5, wrap_async
from .weather import infill_weather, read_weather_csv, resample_weather, split_series, write_weather_csv

__all__ = [
    'WEATHER_RESOLUTIONS',
    'MINED_RESOLUTIONS',
    'Bundle',
    'prepare_bundle',
    'constant_schedule',
]

log = logging.getLogger('tempocal.bundle')

WEATHER_RESOLUTIONS = (Resolution.min1, Resolution.min5, Resolution.min15, Resolution.min30, Resolution.hourly)

# profiles are mined from measurements up to 6-hourly; daily and monthly use nominal shapes
MINED_RESOLUTIONS = WEATHER_RESOLUTIONS + (Resolution.hour6,)


def constant_schedule(resolution: Resolution) -> RoleSchedule:
    return RoleSchedule(resolution, np.ones(resolution.steps_per_day))


def _whole_days(series: MeteredSeries) -> MeteredSeries:
    steps = series.resolution.steps_per_day
    keep = len(series) // steps * steps
    if keep == 0:
        raise DataError(f'{series.channel}: less than one whole day of {series.resolution} data')
    if keep != len(series):
        log.warning('%s: clustering ignores %d trailing steps of a partial day', series.channel, len(series) - keep)
        return MeteredSeries(series.channel, series.start, series.resolution, series.values[:keep], series.missing[:keep])
    return series


def mine_schedules(electricity: MeteredSeries, dhw: MeteredSeries, k_min: int, k_max: int, seed: int) -> ScheduleSet:
    electric_matrix: DailyMatrix = reshape_daily(_whole_days(electricity))
    dhw_matrix: DailyMatrix = reshape_daily(_whole_days(dhw))

    schedules = build_schedules(electric_matrix, ELECTRIC_ROLES, k_min, k_max, seed)
    schedules = schedules.merged(build_schedules(dhw_matrix, (Role.dhw,), k_min, k_max, seed))
    return schedules.merged(ScheduleSet(electricity.resolution, {Role.infiltration: constant_schedule(electricity.resolution)}))


def _load_measurements(config: TempocalConfig) -> dict[Channel, MeteredSeries]:
    measured = {}
    for channel in Channel:
        path = config.path_for('measurements', channel.value)
        if path is None:
            raise DataError(f'no measurement file configured for {channel}')
        measured[channel] = read_series_csv(path, channel)

    reference = measured[Channel.heating]
    for channel, series in measured.items():
        if (series.start, series.resolution, len(series)) != (reference.start, reference.resolution, len(reference)):
            raise DataError(f'{channel} measurements do not cover the same steps as heating '
                            f'({series.start}, {series.resolution}, {len(series)} steps)')

    if reference.resolution.is_calendar or reference.resolution > Resolution.hourly:
        raise DataError(f'measurements must be at most hourly, got {reference.resolution}')

    return measured


async def prepare_bundle(config: TempocalConfig, directory: Optional[str | os.PathLike] = None) -> Path:
    """Runs the whole data preparation and writes the bundle. Returns its directory."""

    directory = Path(directory) if directory is not None else config.bundle_path
    resolutions = config.resolutions
    profiles = config.profile_settings

    async with RunSession(directory, 'bundle', config.settings) as session:
        session.callback(announce, on_commit=True, on_rollback=True)
        measured = await wrap_async(_load_measurements)(config)
        base = measured[Channel.heating].resolution
        inputs = {channel.value: await md5(config.path_for('measurements', channel.value)) for channel in Channel}

        gaps = Dynamic()
        filled = Dynamic()
        for channel, series in measured.items():
            infilled = infill_linear(series, config.max_gap_seconds)
            filled[channel.value] = series.n_missing - infilled.n_missing
            gaps[channel.value] = [(ts, seconds) for ts, seconds in find_gaps(infilled)]
            if gaps[channel.value]:
                log.warning('%s: %d gaps longer than %d s stay missing', channel, len(gaps[channel.value]),
                            config.max_gap_seconds)
            measured[channel] = infilled

        primary_path = config.path_for('weather_primary')
        if primary_path is None:
            raise WeatherError('no primary weather file configured')
        weather = read_weather_csv(primary_path, config.site)
        inputs['weather_primary'] = await md5(primary_path)

        secondary_path = config.path_for('weather_secondary')
        if secondary_path is not None:
            weather = infill_weather(weather, read_weather_csv(secondary_path, config.site))
            inputs['weather_secondary'] = await md5(secondary_path)
        else:
            missing = int(weather.frame[list(WEATHER_FIELDS)].isna().to_numpy().sum())
            if missing:
                raise WeatherError(f'{missing} missing weather values and no secondary source configured')

        if weather.resolution != base:
            raise WeatherError(f'weather is {weather.resolution} but measurements are {base}')
        weather = split_series(weather)

        weather_written = []
        for resolution in WEATHER_RESOLUTIONS:
            if resolution < base:
                continue
            resampled = resample_weather(weather, resolution)
            path = session.path('weather', f'{resolution}.csv')
            await wrap_async(write_weather_csv)(resampled, path)
            session.record(path)
            weather_written.append(resolution.label)

        schedule_info = Dynamic()
        for resolution in resolutions:
            if resolution < base:
                log.warning('skipping %s: measurements are %s', resolution, base)
                continue

            for channel, series in measured.items():
                path = session.path('measurements', resolution.label, f'{channel}.csv')
                await wrap_async(write_series_csv)(aggregate(series, resolution), path)
                session.record(path)

            if resolution in MINED_RESOLUTIONS:
                schedules = mine_schedules(
                    aggregate(measured[Channel.electricity], resolution),
                    aggregate(measured[Channel.dhw], resolution),
                    profiles.k_min, profiles.k_max, profiles.seed,
                )
            else:
                schedules = nominal_schedule_set(resolution)

            for path in write_schedules(schedules, session.directory / 'schedules' / resolution.label):
                session.record(path)

            schedule_info[resolution.label] = {
                str(role): {'chosen_k': s.chosen_k, 'silhouette': None if np.isnan(s.silhouette) else s.silhouette,
                            'scores': {str(k): v for k, v in s.scores.items()}}
                for role, s in schedules.roles.items() if role in (Role.appliances, Role.dhw)
            }

        session.manifest.update({
            'site': {'latitude': config.site.latitude, 'longitude': config.site.longitude},
            'base_resolution': base.label,
            'start': measured[Channel.heating].start,
            'end': measured[Channel.heating].end,
            'resolutions': [r.label for r in resolutions if r >= base],
            'weather': weather_written,
            'weather_filled': {} if weather.provenance is None else
                {k: int(v) for k, v in weather.provenance.sum().items()},
            'inputs': inputs,
            'filled': filled,
            'gaps': gaps,
            'schedules': schedule_info,
            'max_gap_seconds': config.max_gap_seconds,
        })

    return directory


class Bundle:
    def __init__(self, directory: str | os.PathLike):
        self.directory: Path = Path(directory)
        try:
            self.manifest: Dynamic = Dynamic.from_file(self.directory / MANIFEST_FILENAME)
        except FileNotFoundError:
            raise DataError(f'{self.directory}: not a prepared bundle (no {MANIFEST_FILENAME})') from None

        if self.manifest.get('status') != 'complete':
            raise DataError(f'{self.directory}: bundle preparation did not complete')

        produced = Version(self.manifest.version)
        if produced.major > Version(__version__).major:
            raise DataError(f'{self.directory}: bundle written by tempocal {produced}, this is {__version__}')

        self.site: Site = Site(self.manifest.site.latitude, self.manifest.site.longitude)
        self.base_resolution: Resolution = Resolution.parse(self.manifest.base_resolution)

    @property
    def resolutions(self) -> list[Resolution]:
        return [Resolution.parse(name) for name in self.manifest.resolutions]

    def measurements(self, resolution: Resolution) -> dict[Channel, MeteredSeries]:
        if resolution not in self.resolutions:
            raise ResolutionError(f'{self.directory}: no {resolution} measurements in bundle')
        return {
            channel: read_series_csv(self.directory / 'measurements' / resolution.label / f'{channel}.csv', channel, resolution)
            for channel in Channel
        }

    def weather(self, resolution: Resolution) -> WeatherSeries:
        path = self.directory / 'weather' / f'{resolution}.csv'
        if not path.exists():
            raise WeatherError(f'{self.directory}: no {resolution} weather in bundle')
        return read_weather_csv(path, self.site, resolution)

    def schedules(self, resolution: Resolution) -> ScheduleSet:
        directory = self.directory / 'schedules' / resolution.label
        if not directory.is_dir():
            raise ScheduleError(f'{self.directory}: no {resolution} schedules in bundle')
        return read_schedules(directory)
