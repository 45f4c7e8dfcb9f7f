import abc
import functools
import importlib
import importlib.util
import logging
import re
import sys
from dataclasses import dataclass
from typing import ClassVar, Iterable, Optional

import numpy as np
import pandas as pd

from ..dynamic import Dynamic
from ..errors import ConfigError, SimulationError
from ..forms import Form
from ..models import Channel, MeteredSeries, ParameterVector, Resolution, WeatherSeries, as_utc
from ..profiles import ScheduleSet
from ..timeseries import aggregate, mean_aggregate

__all__ = [
    'SimulationOutput',
    'SimulatorBase',
    'Horizon',
    'post_aggregate',
    'parse_gap_spec',
    'synthesize_ground_truth',
]

Horizon = tuple[pd.Timestamp, pd.Timestamp]

GAP_SPEC_REGEX = re.compile(r'^\s*(?P<count>\d+)\s*[x×]\s*(?P<duration>\d+(?:\.\d+)?)\s*(?P<unit>[hm])\s*$', re.IGNORECASE)


@dataclass(frozen=True, eq=False)
class SimulationOutput:
    """
    Metered channels at the simulation time-step, plus the zone temperature
    (C, step mean) and the effective internal gains (W, step mean).
    """

    channels: dict[Channel, MeteredSeries]
    zone_temperature: np.ndarray
    internal_gains: np.ndarray

    def __getitem__(self, channel: Channel) -> MeteredSeries:
        return self.channels[channel]

    @property
    def resolution(self) -> Resolution:
        return next(iter(self.channels.values())).resolution

    @property
    def start(self) -> pd.Timestamp:
        return next(iter(self.channels.values())).start


class SimulatorBase:
    # reserved
    id: ClassVar[str]
    log: logging.Logger

    def __init__(self, settings: Optional[Dynamic] = None):
        self.settings: Dynamic = Dynamic(settings or {})
        self.log = logging.getLogger(f'tempocal.simulator.{self.id}')

    @classmethod
    def config_form(cls) -> Optional[Form]:
        """
        Returns a form for the simulator settings (the `building` block of
        the run configuration). The simulator can only be instantiated if
        the form validates.
        """

        return None

    @classmethod
    def setup(cls, settings: Optional[dict] = None) -> 'SimulatorBase':
        """Validates `settings` against the config form and instantiates the simulator."""

        form = cls.config_form()
        if form is None:
            return cls(Dynamic(settings or {}))

        return cls(form.validated(settings or {}))

    def __reduce__(self):
        # workers are started fresh, plugin modules may not be importable by name
        cls = type(self)
        source = getattr(sys.modules.get(cls.__module__), '__file__', None)
        return _restore_simulator, (cls.__module__, cls.__qualname__, source, cls.id, dict(self.settings))

    @abc.abstractmethod
    def simulate(self,
        params: ParameterVector,
        weather: WeatherSeries,
        schedules: ScheduleSet,
        timestep: Resolution,
        horizon: Horizon
    ) -> SimulationOutput:
        """
        Simulates the horizon [start, end) at `timestep` (at most hourly).
        Must be pure: identical inputs give identical outputs.
        """
        pass


def _restore_simulator(module_name: str, qualname: str, source: Optional[str], simulator_id: str,
                       settings: dict) -> SimulatorBase:
    module = sys.modules.get(module_name)
    if module is None:
        try:
            module = importlib.import_module(module_name)
        except ImportError:
            if source is None:
                raise
            spec = importlib.util.spec_from_file_location(module_name, source)
            module = importlib.util.module_from_spec(spec)
            sys.modules[module_name] = module
            spec.loader.exec_module(module)

    cls = functools.reduce(getattr, qualname.split('.'), module)
    cls.id = simulator_id
    return cls(Dynamic(settings))


def post_aggregate(output: SimulationOutput, target: Resolution) -> SimulationOutput:
    """Aggregates an hourly simulation to a 6-hour, daily or monthly one."""

    if output.resolution != Resolution.hourly:
        raise SimulationError(f'post-aggregation needs an hourly simulation, got {output.resolution}')

    if target not in (Resolution.hour6, Resolution.daily, Resolution.monthly):
        raise SimulationError(f'cannot post-aggregate to {target}')

    channels = {channel: aggregate(series, target) for channel, series in output.channels.items()}
    return SimulationOutput(
        channels=channels,
        zone_temperature=mean_aggregate(output.zone_temperature, output.start, output.resolution, target),
        internal_gains=mean_aggregate(output.internal_gains, output.start, output.resolution, target),
    )


def parse_gap_spec(spec: str) -> list[int]:
    """`<count>x<duration><h|m>` to a list of gap durations in seconds."""

    match = GAP_SPEC_REGEX.match(spec)
    if not match:
        raise ConfigError(f'invalid gap spec {spec!r}, expected e.g. "1x4h" or "3x30m"')

    unit = 3600 if match.group('unit').lower() == 'h' else 60
    seconds = int(round(float(match.group('duration')) * unit))
    return [seconds] * int(match.group('count'))


def _place_gaps(rng: np.random.Generator, n: int, lengths: list[int]) -> np.ndarray:
    missing = np.zeros(n, dtype=bool)
    # keep one observed step on either side of each gap
    taken = np.zeros(n, dtype=bool)

    for length in sorted(lengths, reverse=True):
        if length + 2 > n:
            raise ConfigError(f'a {length}-step gap does not fit in a {n}-step series')

        for _ in range(1000):
            begin = int(rng.integers(1, n - length))
            if not taken[begin - 1:begin + length + 1].any():
                break
        else:
            raise ConfigError('could not place all gaps without overlap')

        missing[begin:begin + length] = True
        taken[begin - 1:begin + length + 1] = True

    return missing


def synthesize_ground_truth(
    simulator: SimulatorBase,
    params: ParameterVector,
    weather: WeatherSeries,
    schedules: ScheduleSet,
    horizon: Horizon,
    noise_level: float = 0.0,
    seed: int = 0,
    gaps: Iterable[str] = (),
) -> dict[Channel, MeteredSeries]:
    """
    One-minute "measurements": the simulation with multiplicative lognormal
    noise (unit mean, relative spread `noise_level`) and the requested
    missing runs, shared by all channels.
    """

    if noise_level < 0:
        raise ConfigError(f'noise level must be non-negative, got {noise_level}')

    horizon = (as_utc(horizon[0]), as_utc(horizon[1]))
    output = simulator.simulate(params, weather, schedules, Resolution.min1, horizon)
    rng = np.random.default_rng(seed)

    n = len(output.zone_temperature)
    step = Resolution.min1.step_seconds
    lengths = []
    for spec in gaps:
        for seconds in parse_gap_spec(spec):
            lengths.append(max(1, seconds // step))
    missing = _place_gaps(rng, n, lengths)

    measured = {}
    for channel in Channel:
        values = output[channel].values
        if noise_level > 0:
            noise = np.exp(noise_level * rng.standard_normal(n) - 0.5 * noise_level ** 2)
            values = values * noise
        measured[channel] = output[channel].with_values(np.where(missing, np.nan, values), missing)

    return measured
