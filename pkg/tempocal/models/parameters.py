from dataclasses import dataclass
from typing import Any, Iterator, Mapping, Optional

import numpy as np

from ..errors import ConfigError, SimulationError

__all__ = [
    'Variable',
    'ParameterSpace',
    'ParameterVector',
    'DEFAULT_SPACE',
]


@dataclass(frozen=True)
class Variable:
    name: str
    label: str
    unit: str
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ConfigError(f'plausible range of {self.name} must satisfy lo < hi, got [{self.lo}, {self.hi}]')

    @property
    def width(self) -> float:
        return self.hi - self.lo


class ParameterSpace:
    """
    The calibrated variables and their plausible ranges. Vectors are plain
    float arrays ordered like `names`; batches are (m, n) arrays.
    """

    def __init__(self, variables: tuple[Variable, ...]):
        self.variables: tuple[Variable, ...] = tuple(variables)
        self._index: dict[str, int] = {v.name: i for i, v in enumerate(self.variables)}

        if len(self._index) != len(self.variables):
            raise ConfigError('duplicate variable names in parameter space')

        self.lower: np.ndarray = np.array([v.lo for v in self.variables], dtype=np.float64)
        self.upper: np.ndarray = np.array([v.hi for v in self.variables], dtype=np.float64)
        self.lower.setflags(write=False)
        self.upper.setflags(write=False)

    def __len__(self) -> int:
        return len(self.variables)

    def __iter__(self) -> Iterator[Variable]:
        return iter(self.variables)

    def __getitem__(self, name: str) -> Variable:
        return self.variables[self._index[name]]

    def __eq__(self, other):
        return isinstance(other, ParameterSpace) and self.variables == other.variables

    def __hash__(self):
        return hash(self.variables)

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    def index(self, name: str) -> int:
        return self._index[name]

    def contains(self, values: np.ndarray) -> np.ndarray | bool:
        values = np.asarray(values)
        inside = (values >= self.lower) & (values <= self.upper)
        if values.ndim == 1:
            return bool(inside.all())
        return inside.all(axis=1)

    def vector(self, values: np.ndarray | Mapping[str, float]) -> 'ParameterVector':
        if isinstance(values, Mapping):
            unknown = set(values) - set(self._index)
            if unknown:
                raise ConfigError(f'unknown parameters: {", ".join(sorted(unknown))}')
            missing = set(self._index) - set(values)
            if missing:
                raise ConfigError(f'missing parameters: {", ".join(sorted(missing))}')
            values = [values[name] for name in self.names]

        return ParameterVector(self, np.asarray(values, dtype=np.float64))

    def with_overrides(self, overrides: Optional[Mapping[str, Any]]) -> 'ParameterSpace':
        if not overrides:
            return self

        variables = []
        for v in self.variables:
            if v.name in overrides:
                lo, hi = overrides[v.name]
                variables.append(Variable(v.name, v.label, v.unit, float(lo), float(hi)))
            else:
                variables.append(v)

        unknown = set(overrides) - set(self._index)
        if unknown:
            raise ConfigError(f'unknown parameters: {", ".join(sorted(unknown))}')

        return ParameterSpace(tuple(variables))


@dataclass(frozen=True, eq=False)
class ParameterVector:
    space: ParameterSpace
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (len(self.space),):
            raise SimulationError(f'expected {len(self.space)} parameter values, got {values.shape}')

        if not self.space.contains(values):
            outside = [
                f'{v.name}={x:g} not in [{v.lo:g}, {v.hi:g}]'
                for v, x in zip(self.space, values) if not v.lo <= x <= v.hi
            ]
            raise SimulationError(f'parameters outside plausible ranges: {"; ".join(outside)}', values)

        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.space.index(name)])

    def as_dict(self) -> dict[str, float]:
        return {name: float(x) for name, x in zip(self.space.names, self.values)}


# the wall insulation range is published as [0.05, 0.01]; read as [0.05, 0.10]
DEFAULT_SPACE = ParameterSpace((
    Variable('occupant_gain', 'Occupant heat gain density', 'W/m2', 0.9, 1.1),
    Variable('appliance_density', 'Appliance power density', 'W/m2', 10.0, 50.0),
    Variable('lighting_density', 'Lighting power density', 'W/m2', 2.0, 5.0),
    Variable('appliance_radiant', 'Appliance radiant fraction', '%', 20.0, 40.0),
    Variable('lighting_radiant', 'Lighting radiant fraction', '%', 30.0, 60.0),
    Variable('ventilation', 'Ventilation rate', 'm3/s-m2', 3.0e-4, 9.0e-4),
    Variable('infiltration', 'Infiltration rate', 'm3/s-m2', 3.0e-5, 9.0e-5),
    Variable('heating_setpoint', 'Heating set-point temperature', 'C', 18.0, 24.0),
    Variable('cooling_setpoint', 'Cooling set-point temperature', 'C', 24.0, 27.0),
    Variable('glass_dirt', 'Glass dirt correction factor', '-', 0.5, 0.9),
    Variable('wall_insulation', 'Insulation thickness (wall)', 'm', 0.05, 0.10),
    Variable('floor_insulation', 'Insulation thickness (floor & ceiling)', 'm', 0.2, 0.4),
    Variable('window_insulation', 'Insulation thickness (window)', 'm', 5.0e-4, 1.5e-3),
    Variable('dhw_peak_flow', 'DHW peak flow rate', 'm3/s', 1.0e-5, 1.0e-4),
))
