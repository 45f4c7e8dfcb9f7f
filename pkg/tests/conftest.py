import numpy as np
import pandas as pd
import pytest

from tempocal.models import DEFAULT_SPACE, WEATHER_FIELDS, Channel, MeteredSeries, Resolution, Site, WeatherSeries, as_utc
from tempocal.profiles import synthetic_schedules
from tempocal.simulators import RCSimulator
from tempocal.weather import synthetic_weather

START = pd.Timestamp('2023-01-02', tz='UTC')

TRUE_VALUES = {
    'occupant_gain': 1.0,
    'appliance_density': 30.0,
    'lighting_density': 3.5,
    'appliance_radiant': 30.0,
    'lighting_radiant': 45.0,
    'ventilation': 6.0e-4,
    'infiltration': 6.0e-5,
    'heating_setpoint': 21.0,
    'cooling_setpoint': 25.5,
    'glass_dirt': 0.7,
    'wall_insulation': 0.075,
    'floor_insulation': 0.3,
    'window_insulation': 1.0e-3,
    'dhw_peak_flow': 5.0e-5,
}


@pytest.fixture(scope='session')
def site():
    return Site(47.4, 8.6)


@pytest.fixture(scope='session')
def start():
    return START


@pytest.fixture(scope='session')
def space():
    return DEFAULT_SPACE


@pytest.fixture(scope='session')
def true_params():
    return DEFAULT_SPACE.vector(TRUE_VALUES)


@pytest.fixture(scope='session')
def hourly_weather(site):
    return synthetic_weather(site, START, 3, seed=11, resolution=Resolution.hourly)


@pytest.fixture(scope='session')
def minute_weather(site):
    return synthetic_weather(site, START, 2, seed=11)


@pytest.fixture(scope='session')
def schedules():
    return synthetic_schedules(START, 3, seed=5)


@pytest.fixture(scope='session')
def simulator():
    return RCSimulator.setup({})


@pytest.fixture
def make_series():
    def factory(values, resolution=Resolution.hourly, start=START, channel=Channel.heating, missing=None):
        return MeteredSeries(channel, start, resolution, np.asarray(values, dtype=np.float64), missing)

    return factory


@pytest.fixture
def make_weather(site):
    def factory(n, resolution=Resolution.hourly, start='2023-06-01', **overrides):
        values = {
            'dry_bulb': 15.0,
            'dew_point': 8.0,
            'rh': 60.0,
            'pressure': 96500.0,
            'wind_speed': 3.0,
            'wind_dir': 180.0,
            'ghi': 0.0,
        }
        values.update(overrides)
        index = pd.date_range(as_utc(start), periods=n, freq=resolution.pandas_freq)
        frame = pd.DataFrame({name: np.full(n, values[name], dtype=np.float64) for name in WEATHER_FIELDS}, index=index)
        return WeatherSeries(site, resolution, frame)

    return factory
