"""
Typical daily schedules mined from metered data.

Day vectors are clustered with PAM k-medoids (scikit-learn-extra, BUILD then
SWAP on Euclidean distances), the number of clusters is chosen by the mean
silhouette, and each cluster mean becomes the profile applied to all of its
member days. Profiles are stored as fractions of the global peak so the
simulator scales them by the calibrated power densities.
"""

import json
import logging
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Optional

import numpy as np
import pandas as pd
from natsort import natsorted
from sklearn.exceptions import ConvergenceWarning
from sklearn.metrics import pairwise_distances, silhouette_score
from sklearn_extra.cluster import KMedoids

from .errors import ClusteringError, ScheduleError
from .models import DailyMatrix, Resolution, Role, SECONDS_PER_DAY, as_utc, timestamps_for
from .timeseries import format_timestamps

__all__ = [
    'ELECTRIC_ROLES',
    'Clustering',
    'RoleSchedule',
    'ScheduleSet',
    'kmedoids',
    'silhouette',
    'silhouette_scan',
    'best_k',
    'select_k',
    'mine_role_schedule',
    'build_schedules',
    'nominal_schedule',
    'nominal_schedule_set',
    'synthetic_schedules',
    'write_schedules',
    'read_schedules',
]

log = logging.getLogger('tempocal.profiles')

# occupancy, lighting and appliances share the electricity-derived profile
ELECTRIC_ROLES = (Role.occupancy, Role.lighting, Role.appliances)

MAX_SWAPS = 300

# built-in residential shapes, hourly fraction of peak, constant across days
NOMINAL_SHAPES = {
    Role.occupancy: (
        1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.8,
        0.5, 0.4, 0.4, 0.4, 0.5, 0.4, 0.4, 0.4,
        0.5, 0.6, 0.8, 0.8, 0.8, 0.8, 0.9, 1.0,
    ),
    Role.lighting: (
        0.1, 0.05, 0.05, 0.05, 0.05, 0.1, 0.3, 0.4,
        0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1,
        0.2, 0.4, 0.7, 1.0, 1.0, 0.9, 0.6, 0.3,
    ),
    Role.appliances: (
        0.2, 0.2, 0.2, 0.2, 0.2, 0.2, 0.4, 0.6,
        0.5, 0.3, 0.3, 0.4, 0.6, 0.4, 0.3, 0.3,
        0.4, 0.6, 1.0, 0.9, 0.7, 0.6, 0.4, 0.3,
    ),
    Role.dhw: (
        0.0, 0.0, 0.0, 0.0, 0.0, 0.1, 0.6, 1.0,
        0.6, 0.3, 0.2, 0.2, 0.3, 0.2, 0.1, 0.1,
        0.1, 0.2, 0.4, 0.6, 0.5, 0.4, 0.2, 0.1,
    ),
    Role.infiltration: (1.0,) * 24,
}


class Clustering(NamedTuple):
    medoids: np.ndarray
    labels: np.ndarray
    cost: float
    history: list[float]


def _rows(points: DailyMatrix | np.ndarray) -> np.ndarray:
    if isinstance(points, DailyMatrix):
        return points.rows
    return np.atleast_2d(np.asarray(points, dtype=np.float64))


def _pam(x: np.ndarray, k: int, seed: int, max_iter: int) -> KMedoids:
    model = KMedoids(n_clusters=k, metric='euclidean', method='pam', init='build',
                     max_iter=max_iter, random_state=seed)
    with warnings.catch_warnings():
        # a capped max_iter is how the swap trace is read
        warnings.simplefilter('ignore', ConvergenceWarning)
        model.fit(x)
    return model


def kmedoids(points: DailyMatrix | np.ndarray, k: int, seed: int = 0, trace: bool = False) -> Clustering:
    """
    PAM k-medoids (BUILD initialisation, then one best swap per iteration).
    Medoids are returned sorted with labels numbered by medoid order.

    With `trace`, the fit is repeated with `max_iter` = 1, 2, ... until the
    medoids stop moving, so `history` holds the cost after every swap.
    """

    x = _rows(points)
    n = len(x)
    if not 1 <= k <= n:
        raise ClusteringError(f'k must lie in [1, {n}], got {k}')

    # every point its own medoid
    if k == n:
        return Clustering(np.arange(n), np.arange(n), 0.0, [0.0])

    if trace:
        history = []
        previous = None
        for max_iter in range(1, MAX_SWAPS + 1):
            model = _pam(x, k, seed, max_iter)
            history.append(float(model.inertia_))
            current = sorted(model.medoid_indices_.tolist())
            if current == previous:
                break
            previous = current
    else:
        model = _pam(x, k, seed, MAX_SWAPS)
        history = [float(model.inertia_)]

    medoids = np.sort(np.asarray(model.medoid_indices_, dtype=np.int64))
    d = pairwise_distances(x, x[medoids], metric='euclidean')
    labels = np.argmin(d, axis=1)
    cost = float(d[np.arange(n), labels].sum())

    return Clustering(medoids, labels, cost, history)


def silhouette(points: DailyMatrix | np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette; singleton clusters and a = b = 0 points score 0."""

    x = _rows(points)
    labels = np.asarray(labels)
    n_clusters = len(np.unique(labels))
    if n_clusters < 2:
        raise ClusteringError('silhouette needs at least two clusters')

    # every cluster a singleton
    if n_clusters == len(x):
        return 0.0

    return float(silhouette_score(x, labels, metric='euclidean'))


def silhouette_scan(points: DailyMatrix | np.ndarray, k_min: int = 2, k_max: int = 10,
                    seed: int = 0) -> dict[int, tuple[float, Clustering]]:
    x = _rows(points)
    k_max = min(k_max, len(x) - 1)
    if k_min < 2 or k_min > k_max:
        raise ClusteringError(f'empty k range [{k_min}, {k_max}] for {len(x)} days')

    table = {}
    for k in range(k_min, k_max + 1):
        clustering = kmedoids(x, k, seed)
        try:
            score = silhouette(x, clustering.labels)
        except ClusteringError:
            # duplicate days collapsed every point into one cluster
            score = -1.0
        table[k] = (score, clustering)
        log.debug('k=%d silhouette=%.4f cost=%.6g', k, table[k][0], clustering.cost)

    return table


def best_k(scores: Mapping[int, float]) -> int:
    """The k with the highest score; ties go to the smaller k."""

    chosen = None
    for k in sorted(scores):
        if chosen is None or scores[k] > scores[chosen]:
            chosen = k
    if chosen is None:
        raise ClusteringError('empty k range')
    return chosen


def select_k(points: DailyMatrix | np.ndarray, k_min: int = 2, k_max: int = 10, seed: int = 0) -> int:
    table = silhouette_scan(points, k_min, k_max, seed)
    return best_k({k: score for k, (score, _) in table.items()})


@dataclass(frozen=True, eq=False)
class RoleSchedule:
    """
    Typical profiles (k x steps-per-day, fraction of `peak`) and the
    cluster of every calendar day since `start`. A schedule without an
    assignment repeats profile 0 on every day.
    """

    resolution: Resolution
    profiles: np.ndarray
    assignment: Optional[np.ndarray] = None
    start: Optional[pd.Timestamp] = None
    chosen_k: int = 1
    silhouette: float = float('nan')
    peak: float = 1.0
    scores: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        profiles = np.atleast_2d(np.asarray(self.profiles, dtype=np.float64))
        if profiles.shape[1] != self.resolution.steps_per_day:
            raise ScheduleError(f'{self.resolution} profiles need {self.resolution.steps_per_day} steps, '
                                f'got {profiles.shape[1]}')
        if np.any(profiles < 0) or np.any(profiles > 1.0 + 1e-12):
            raise ScheduleError('profile values must lie in [0, 1]')

        if self.assignment is not None:
            assignment = np.asarray(self.assignment, dtype=np.int64)
            if self.start is None:
                raise ScheduleError('a day assignment needs a start date')
            if np.any((assignment < 0) | (assignment >= len(profiles))):
                raise ScheduleError('day assignment refers to an unknown cluster')
            assignment.setflags(write=False)
            object.__setattr__(self, 'assignment', assignment)
            object.__setattr__(self, 'start', as_utc(self.start).normalize())

        profiles.setflags(write=False)
        object.__setattr__(self, 'profiles', profiles)

    def day_profiles(self) -> np.ndarray:
        """Days x steps matrix of the profile applied to each day."""
        if self.assignment is None:
            return self.profiles[:1]
        return self.profiles[self.assignment]

    def expand(self, start, n: int, resolution: Resolution) -> np.ndarray:
        """
        Schedule values on an arbitrary fixed-step grid: step-hold onto
        finer grids, interval means onto coarser ones.
        """

        start = as_utc(start)
        if resolution.is_calendar or resolution > Resolution.daily:
            raise ScheduleError(f'schedules cannot be expanded to {resolution}')

        if resolution > self.resolution:
            factor = resolution.step_seconds // self.resolution.step_seconds
            fine = self.expand(start, n * factor, self.resolution)
            return fine.reshape(n, factor).mean(axis=1)

        stamps = timestamps_for(start, resolution, n)
        nanos = stamps.asi8
        if self.assignment is None:
            day = np.zeros(n, dtype=np.int64)
            seconds = (nanos - stamps.normalize().asi8) // 10**9
        else:
            offset = (nanos - self.start.value) // 10**9
            day = offset // SECONDS_PER_DAY
            seconds = offset % SECONDS_PER_DAY
            if n and (day[0] < 0 or day[-1] >= len(self.assignment)):
                raise ScheduleError(f'schedule covers {len(self.assignment)} days from {self.start.date()}, '
                                    f'requested {stamps[0]} to {stamps[-1]}')
            day = self.assignment[day]

        return self.profiles[day, seconds // self.resolution.step_seconds]


@dataclass(frozen=True, eq=False)
class ScheduleSet:
    resolution: Resolution
    roles: dict[Role, RoleSchedule]

    def __post_init__(self):
        for role, schedule in self.roles.items():
            if schedule.resolution != self.resolution:
                raise ScheduleError(f'{role} schedule is {schedule.resolution}, expected {self.resolution}')

    def __getitem__(self, role: Role) -> RoleSchedule:
        try:
            return self.roles[role]
        except KeyError:
            raise ScheduleError(f'no {role} schedule') from None

    def __contains__(self, role: Role) -> bool:
        return role in self.roles

    def expand(self, role: Role, start, n: int, resolution: Resolution) -> np.ndarray:
        return self[role].expand(start, n, resolution)

    def merged(self, other: 'ScheduleSet') -> 'ScheduleSet':
        if other.resolution != self.resolution:
            raise ScheduleError(f'cannot merge {other.resolution} schedules into {self.resolution}')
        return ScheduleSet(self.resolution, {**self.roles, **other.roles})

    def missing_roles(self) -> list[Role]:
        return [role for role in Role if role not in self.roles]


def _assign_excluded(matrix: DailyMatrix, means: np.ndarray, labels: np.ndarray) -> np.ndarray:
    assignment = np.empty(matrix.n_days, dtype=np.int64)
    assignment[matrix.day_index] = labels
    most_populous = int(np.argmax(np.bincount(labels, minlength=len(means))))

    for day in np.flatnonzero(matrix.excluded):
        row = matrix.values[day]
        observed = ~np.isnan(row)
        if not observed.any():
            assignment[day] = most_populous
            continue
        distances = np.sqrt(((means[:, observed] - row[observed]) ** 2).sum(axis=1))
        assignment[day] = int(np.argmin(distances))

    return assignment


def mine_role_schedule(matrix: DailyMatrix, k_min: int = 2, k_max: int = 10, seed: int = 0) -> RoleSchedule:
    rows = matrix.rows
    if len(rows) == 0:
        raise ScheduleError(f'{matrix.channel}: no complete days to cluster')

    scores = {}
    if len(rows) <= k_min:
        log.warning('%s: only %d complete days, using a single profile', matrix.channel, len(rows))
        labels = np.zeros(len(rows), dtype=np.int64)
        chosen, score = 1, float('nan')
    else:
        table = silhouette_scan(rows, k_min, k_max, seed)
        scores = {k: s for k, (s, _) in table.items()}
        chosen = best_k(scores)
        score, clustering = table[chosen]
        labels = clustering.labels

    present = np.unique(labels)
    if len(present) < chosen:
        labels = np.searchsorted(present, labels)
        chosen = len(present)

    means = np.stack([rows[labels == c].mean(axis=0) for c in range(chosen)])
    peak = float(means.max())
    if peak > 0:
        profiles = means / peak
    else:
        log.warning('%s: all cluster profiles are zero', matrix.channel)
        profiles, peak = means, 0.0

    assignment = _assign_excluded(matrix, means, labels)
    log.info('%s %s: k=%d silhouette=%.3f over %d days (%d excluded)',
             matrix.channel, matrix.resolution, chosen, score, matrix.n_days, int(matrix.excluded.sum()))

    return RoleSchedule(
        resolution=matrix.resolution,
        profiles=profiles,
        assignment=assignment,
        start=matrix.start,
        chosen_k=chosen,
        silhouette=score,
        peak=peak,
        scores=scores,
    )


def build_schedules(matrix: DailyMatrix, roles: Iterable[Role] = ELECTRIC_ROLES,
                    k_min: int = 2, k_max: int = 10, seed: int = 0) -> ScheduleSet:
    schedule = mine_role_schedule(matrix, k_min, k_max, seed)
    return ScheduleSet(matrix.resolution, {role: schedule for role in roles})


def nominal_schedule(role: Role, resolution: Resolution = Resolution.daily) -> RoleSchedule:
    """The built-in hourly shape for `role`, identical on every day."""

    if resolution < Resolution.daily and role is not Role.infiltration:
        log.warning('nominal %s profile requested for a %s calibration; mined profiles expected',
                    role, resolution)

    return RoleSchedule(Resolution.hourly, np.asarray(NOMINAL_SHAPES[role], dtype=np.float64))


def nominal_schedule_set(resolution: Resolution = Resolution.daily) -> ScheduleSet:
    return ScheduleSet(Resolution.hourly, {role: nominal_schedule(role, resolution) for role in Role})


def _minute_template(anchors: tuple[float, ...]) -> np.ndarray:
    hours = np.arange(len(anchors) + 1, dtype=np.float64)
    minutes = np.arange(SECONDS_PER_DAY // 60) / 60.0
    return np.interp(minutes, hours, np.append(anchors, anchors[0]))


_WEEKEND_SHIFT = 2 * 60


def synthetic_schedules(start, days: int, seed: int, variability: float = 0.02) -> ScheduleSet:
    """
    Minute-resolution ground-truth schedules: weekday and weekend templates
    (the weekend shifted two hours later) with a small per-day amplitude
    jitter. Every day carries its own profile.
    """

    rng = np.random.default_rng(seed)
    start = as_utc(start).normalize()
    weekend = (pd.date_range(start, periods=days, freq='D').dayofweek >= 5)

    def role_profiles(template: np.ndarray) -> tuple[np.ndarray, float]:
        shifted = np.roll(template, _WEEKEND_SHIFT)
        daily = np.where(weekend[:, None], shifted[None, :], template[None, :])
        jitter = 1.0 + variability * rng.standard_normal((days, 24)).repeat(60, axis=1)
        daily = np.clip(daily * jitter, 0.0, None)
        peak = float(daily.max())
        return daily / peak, peak

    electric, electric_peak = role_profiles(_minute_template(NOMINAL_SHAPES[Role.appliances]))
    dhw, dhw_peak = role_profiles(_minute_template(NOMINAL_SHAPES[Role.dhw]))

    assignment = np.arange(days)
    electric_schedule = RoleSchedule(Resolution.min1, electric, assignment, start, days, peak=electric_peak)
    roles = {role: electric_schedule for role in ELECTRIC_ROLES}
    roles[Role.dhw] = RoleSchedule(Resolution.min1, dhw, assignment, start, days, peak=dhw_peak)
    roles[Role.infiltration] = RoleSchedule(Resolution.min1, np.ones(SECONDS_PER_DAY // 60))

    return ScheduleSet(Resolution.min1, roles)


def write_schedules(schedules: ScheduleSet, directory: str | os.PathLike) -> list[Path]:
    """
    Writes `<role>.csv` (step,cluster_<i>), `<role>_days.csv` (day,cluster)
    and the `schedules.json` metadata. Returns the written paths.
    """

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    meta = {'resolution': schedules.resolution.label, 'roles': {}}

    for role, schedule in schedules.roles.items():
        profiles = pd.DataFrame(
            schedule.profiles.T,
            columns=[f'cluster_{i}' for i in range(len(schedule.profiles))],
        )
        profiles.insert(0, 'step', np.arange(len(profiles)))
        path = directory / f'{role}.csv'
        profiles.to_csv(path, index=False)
        written.append(path)

        if schedule.assignment is not None:
            days = pd.DataFrame({
                'day': pd.date_range(schedule.start, periods=len(schedule.assignment), freq='D').strftime('%Y-%m-%d'),
                'cluster': schedule.assignment,
            })
            path = directory / f'{role}_days.csv'
            days.to_csv(path, index=False)
            written.append(path)

        meta['roles'][role.value] = {
            'chosen_k': schedule.chosen_k,
            'silhouette': None if np.isnan(schedule.silhouette) else schedule.silhouette,
            'peak': schedule.peak,
            'start': None if schedule.start is None else format_timestamps(pd.DatetimeIndex([schedule.start]))[0],
            'scores': {str(k): v for k, v in schedule.scores.items()},
        }

    path = directory / 'schedules.json'
    path.write_text(json.dumps(meta, indent=2, sort_keys=True))
    written.append(path)

    return natsorted(written, key=str)


def read_schedules(directory: str | os.PathLike) -> ScheduleSet:
    directory = Path(directory)
    try:
        meta = json.loads((directory / 'schedules.json').read_text())
    except FileNotFoundError:
        raise ScheduleError(f'{directory}: no schedules.json') from None

    resolution = Resolution.parse(meta['resolution'])
    roles = {}
    for name, info in meta['roles'].items():
        role = Role(name)
        profiles = pd.read_csv(directory / f'{role}.csv').drop(columns='step').to_numpy(dtype=np.float64).T

        assignment = None
        days_path = directory / f'{role}_days.csv'
        if days_path.exists():
            assignment = pd.read_csv(days_path)['cluster'].to_numpy(dtype=np.int64)

        roles[role] = RoleSchedule(
            resolution=resolution,
            profiles=profiles,
            assignment=assignment,
            start=None if info['start'] is None else pd.Timestamp(info['start']),
            chosen_k=int(info['chosen_k']),
            silhouette=float('nan') if info['silhouette'] is None else float(info['silhouette']),
            peak=float(info['peak']),
            scores={int(k): float(v) for k, v in info['scores'].items()},
        )

    return ScheduleSet(resolution, roles)
