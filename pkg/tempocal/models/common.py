from enum import Enum
from functools import total_ordering
from typing import Optional

__all__ = [
    'Resolution',
    'Channel',
    'Role',
    'Metric',
    'SECONDS_PER_DAY',
]

SECONDS_PER_DAY = 86400


@total_ordering
class Resolution(Enum):
    # value: (name, step seconds); monthly has no fixed step
    min1 = ('min1', 60)
    min5 = ('min5', 300)
    min15 = ('min15', 900)
    min30 = ('min30', 1800)
    hourly = ('hourly', 3600)
    hour6 = ('hour6', 21600)
    daily = ('daily', 86400)
    monthly = ('monthly', None)

    @property
    def label(self) -> str:
        return self.value[0]

    @property
    def step_seconds(self) -> Optional[int]:
        return self.value[1]

    @property
    def is_calendar(self) -> bool:
        return self.value[1] is None

    @property
    def rank(self) -> int:
        return list(Resolution).index(self)

    @property
    def steps_per_day(self) -> int:
        if self.is_calendar or self.step_seconds > SECONDS_PER_DAY:
            raise ValueError(f'{self.label} does not divide a day')
        return SECONDS_PER_DAY // self.step_seconds

    @property
    def pandas_freq(self) -> str:
        if self.is_calendar:
            return 'MS'
        return f'{self.step_seconds}s'

    def __lt__(self, other):
        if not isinstance(other, Resolution):
            return NotImplemented
        return self.rank < other.rank

    def finer_than(self, other: 'Resolution') -> bool:
        return self < other

    def coarser_than(self, other: 'Resolution') -> bool:
        return self > other

    @classmethod
    def parse(cls, name: 'str | Resolution') -> 'Resolution':
        if isinstance(name, Resolution):
            return name

        key = name.strip().lower()
        for resolution in cls:
            if resolution.label == key:
                return resolution

        raise ValueError(f'unknown resolution: {name}')

    @classmethod
    def from_step(cls, step_seconds: int) -> 'Resolution':
        for resolution in cls:
            if resolution.step_seconds == step_seconds:
                return resolution

        raise ValueError(f'no resolution with a step of {step_seconds} s')

    def __str__(self):
        return self.label


class Channel(Enum):
    heating = 'heating'
    cooling = 'cooling'
    electricity = 'electricity'
    dhw = 'dhw'

    def __str__(self):
        return self.value


class Role(Enum):
    occupancy = 'occupancy'
    lighting = 'lighting'
    appliances = 'appliances'
    dhw = 'dhw'
    infiltration = 'infiltration'

    def __str__(self):
        return self.value


class Metric(Enum):
    cvrmse = 'cvrmse'
    nmbe = 'nmbe'

    def __str__(self):
        return self.value
