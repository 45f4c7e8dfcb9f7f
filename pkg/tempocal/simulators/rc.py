"""
Single-zone lumped-capacitance building model with ideal heating and
cooling.

    C dT/dt = (UA + H) (T_out - T) + Q_solar + Q_internal + Q_ideal

UA sums area / (R_base + t_ins / k_ins) over wall, floor/ceiling and window;
H = (ventilation + infiltration x schedule) x floor area x rho_air cp_air.
Radiant internal gains reach the zone through a first-order lag (2 h time
constant); convective gains and occupants act immediately. Q_ideal holds T
inside [heating set-point, cooling set-point].
"""

import math
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.signal import lfilter

from ..dynamic import Dynamic
from ..errors import SimulationError
from ..forms import Form, Input, validators
from ..models import Channel, MeteredSeries, ParameterVector, Resolution, Role, WeatherSeries, as_utc
from ..profiles import ScheduleSet
from .base import Horizon, SimulationOutput, SimulatorBase

__all__ = [
    'BuildingSpec',
    'RCSimulator',
]

JOULES_PER_KWH = 3.6e6

# longest explicit Euler sub-step
MAX_SUBSTEP_SECONDS = 360


@dataclass(frozen=True)
class BuildingSpec:
    floor_area: float = 80.0
    glazed_area: float = 15.0
    wall_area: float = 90.0
    floor_ceiling_area: float = 160.0
    window_area: float = 15.0
    capacitance: float = 8.0e6
    wall_conductivity: float = 0.035
    floor_conductivity: float = 0.035
    window_conductivity: float = 0.004
    wall_base_resistance: float = 0.5
    floor_base_resistance: float = 1.0
    window_base_resistance: float = 0.35
    solar_transmittance: float = 0.6
    radiant_time_constant: float = 7200.0
    dhw_delta_t: float = 35.0
    air_density: float = 1.2
    air_heat_capacity: float = 1005.0
    water_density: float = 1000.0
    water_heat_capacity: float = 4186.0

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise SimulationError(f'building {f.name} must be positive, got {getattr(self, f.name)}')

    @classmethod
    def from_dynamic(cls, settings: Dynamic) -> 'BuildingSpec':
        return cls(**{k: float(v) for k, v in settings.items() if v is not None})

    def to_dynamic(self) -> Dynamic:
        return Dynamic(asdict(self))


class RCSimulator(SimulatorBase):
    id = 'rc'

    def __init__(self, settings=None):
        super().__init__(settings)
        self.spec = BuildingSpec.from_dynamic(self.settings)

    @classmethod
    def config_form(cls):
        entries = []
        for f in fields(BuildingSpec):
            entries.append((f.name, Input(f.name.replace('_', ' '), [
                validators.optional(),
                validators.number(min=0, exclusive_min=True),
            ])))

        return Form('building', *entries)

    def conductance(self, params: ParameterVector) -> tuple[float, float]:
        """Envelope UA and nominal ventilation + infiltration H, both W/K."""

        spec = self.spec
        ua = (
            spec.wall_area / (spec.wall_base_resistance + params['wall_insulation'] / spec.wall_conductivity)
            + spec.floor_ceiling_area / (spec.floor_base_resistance + params['floor_insulation'] / spec.floor_conductivity)
            + spec.window_area / (spec.window_base_resistance + params['window_insulation'] / spec.window_conductivity)
        )
        rho_cp = spec.air_density * spec.air_heat_capacity
        h = (params['ventilation'] + params['infiltration']) * spec.floor_area * rho_cp
        return ua, h

    def _integrate(self, conductance: np.ndarray, outdoor: np.ndarray, gains: np.ndarray,
                   heating_setpoint: float, cooling_setpoint: float, dt: float):
        substeps = max(1, math.ceil(dt / MAX_SUBSTEP_SECONDS))
        h = dt / substeps
        c = self.spec.capacitance
        factor = h / c

        # explicit Euler on C dT/dt = -k T is stable for h k / C < 2
        stiffness = factor * float(conductance.max(initial=0.0))
        if stiffness >= 2.0:
            raise SimulationError(f'unstable {h:g} s step: conductance x step / capacitance = {stiffness:.3g} (limit 2)')

        n = len(outdoor)
        net = np.empty(n)
        temperature = np.empty(n)

        t = heating_setpoint
        for i, (k, t_out, q) in enumerate(zip(conductance.tolist(), outdoor.tolist(), gains.tolist())):
            energy = 0.0
            total = 0.0
            for _ in range(substeps):
                total += t
                free = t + factor * (k * (t_out - t) + q)
                if free < heating_setpoint:
                    energy += c * (heating_setpoint - free)
                    t = heating_setpoint
                elif free > cooling_setpoint:
                    energy -= c * (free - cooling_setpoint)
                    t = cooling_setpoint
                else:
                    t = free


            net[i] = energy
            temperature[i] = total / substeps

        return net, temperature

    def simulate(self,
        params: ParameterVector,
        weather: WeatherSeries,
        schedules: ScheduleSet,
        timestep: Resolution,
        horizon: Horizon
    ) -> SimulationOutput:
        if timestep.is_calendar or timestep > Resolution.hourly:
            raise SimulationError(f'simulations run at most hourly, got {timestep}')
        if weather.resolution != timestep:
            raise SimulationError(f'{weather.resolution} weather for a {timestep} simulation')

        heating_setpoint = params['heating_setpoint']
        cooling_setpoint = params['cooling_setpoint']
        if heating_setpoint > cooling_setpoint:
            raise SimulationError(f'heating set-point {heating_setpoint:g} above cooling set-point {cooling_setpoint:g}',
                                  params.values)

        start, end = as_utc(horizon[0]), as_utc(horizon[1])
        weather = weather.window(start, end)
        n = len(weather)
        dt = float(timestep.step_seconds)
        spec = self.spec

        outdoor = weather.column('dry_bulb')
        ghi = weather.column('ghi')
        if np.isnan(outdoor).any() or np.isnan(ghi).any():
            raise SimulationError('weather has missing dry-bulb or irradiance values')

        def profile(role: Role) -> np.ndarray:
            return schedules.expand(role, start, n, timestep)

        area = spec.floor_area
        occupants = params['occupant_gain'] * profile(Role.occupancy) * area
        lighting = params['lighting_density'] * profile(Role.lighting) * area
        appliances = params['appliance_density'] * profile(Role.appliances) * area

        radiant = (params['lighting_radiant'] / 100.0) * lighting + (params['appliance_radiant'] / 100.0) * appliances
        convective = occupants + lighting + appliances - radiant

        ua, _ = self.conductance(params)
        rho_cp = spec.air_density * spec.air_heat_capacity
        air_flow = (params['ventilation'] + params['infiltration'] * profile(Role.infiltration)) * area
        conductance = ua + air_flow * rho_cp

        solar = ghi * spec.glazed_area * spec.solar_transmittance * params['glass_dirt']

        # one warm-up day replaying the start of the horizon
        warmup = min(n, timestep.steps_per_day)

        def with_warmup(x: np.ndarray) -> np.ndarray:
            return np.concatenate((x[:warmup], x))

        alpha = 1.0 - math.exp(-dt / spec.radiant_time_constant)
        lagged = lfilter([alpha], [1.0, alpha - 1.0], with_warmup(radiant))
        internal = with_warmup(convective) + lagged

        net, temperature = self._integrate(
            with_warmup(conductance),
            with_warmup(outdoor),
            with_warmup(solar) + internal,
            heating_setpoint,
            cooling_setpoint,
            dt,
        )
        net, temperature = net[warmup:], temperature[warmup:]

        electricity = (lighting + appliances) * dt / JOULES_PER_KWH
        dhw = (params['dhw_peak_flow'] * profile(Role.dhw) * spec.water_density * spec.water_heat_capacity
               * spec.dhw_delta_t * dt / JOULES_PER_KWH)

        channels = {
            Channel.heating: np.maximum(net, 0.0) / JOULES_PER_KWH,
            Channel.cooling: np.maximum(-net, 0.0) / JOULES_PER_KWH,
            Channel.electricity: electricity,
            Channel.dhw: dhw,
        }

        return SimulationOutput(
            channels={channel: MeteredSeries(channel, start, timestep, values) for channel, values in channels.items()},
            zone_temperature=temperature,
            internal_gains=internal[warmup:],
        )
