import numpy as np
import pandas as pd
import pytest

from tempocal.errors import ConfigError, SimulationError
from tempocal.models import Channel, Resolution, Role
from tempocal.profiles import RoleSchedule, ScheduleSet
from tempocal.simulators import RCSimulator, parse_gap_spec, post_aggregate, synthesize_ground_truth


def flat_schedules(value=0.0, **levels):
    roles = {role: RoleSchedule(Resolution.hourly, np.full(24, levels.get(role.value, value))) for role in Role}
    roles[Role.infiltration] = RoleSchedule(Resolution.hourly, np.ones(24))
    return ScheduleSet(Resolution.hourly, roles)


def params_with(true_params, **changes):
    values = true_params.as_dict()
    values.update(changes)
    return true_params.space.vector(values)


def day_horizon(start, days=1):
    return start, start + pd.Timedelta(days=days)


def test_equilibrium_needs_no_energy(simulator, true_params, make_weather, start):
    weather = make_weather(24, start=start, dry_bulb=21.0, ghi=0.0)
    output = simulator.simulate(true_params, weather, flat_schedules(), Resolution.hourly, day_horizon(start))

    for channel in Channel:
        np.testing.assert_array_equal(output[channel].values, np.zeros(24))
    np.testing.assert_allclose(output.zone_temperature, 21.0)


def test_steady_state_heating(simulator, true_params, make_weather, start):
    params = params_with(true_params, heating_setpoint=20.0)
    weather = make_weather(24, start=start, dry_bulb=0.0, ghi=0.0)

    output = simulator.simulate(params, weather, flat_schedules(), Resolution.hourly, day_horizon(start))

    ua, h = simulator.conductance(params)
    expected = (ua + h) * 20.0 * 3600.0 / 3.6e6
    np.testing.assert_allclose(output[Channel.heating].values, expected, rtol=1e-9)
    np.testing.assert_array_equal(output[Channel.cooling].values, np.zeros(24))


def test_dhw_energy_of_one_peak_hour(simulator, true_params, make_weather, start):
    params = params_with(true_params, dhw_peak_flow=1.0e-5)
    weather = make_weather(24, start=start, dry_bulb=21.0, ghi=0.0)
    output = simulator.simulate(params, weather, flat_schedules(dhw=1.0), Resolution.hourly, day_horizon(start))

    # 1e-5 m3/s x 1000 kg/m3 x 4186 J/kg-K x 35 K over 3600 s
    np.testing.assert_allclose(output[Channel.dhw].values, 1.4651, rtol=1e-4)


def test_held_zone_closes_the_energy_balance(simulator, true_params, make_weather, start):
    weather = make_weather(24, start=start, dry_bulb=-5.0, ghi=100.0)
    output = simulator.simulate(true_params, weather, flat_schedules(0.5), Resolution.hourly, day_horizon(start))
    np.testing.assert_allclose(output.zone_temperature, true_params['heating_setpoint'])

    ua, h = simulator.conductance(true_params)
    spec = simulator.spec
    solar = 100.0 * spec.glazed_area * spec.solar_transmittance * true_params['glass_dirt']
    losses = (ua + h) * (true_params['heating_setpoint'] + 5.0)
    expected = (losses - solar - output.internal_gains) * 3600.0 / 3.6e6

    np.testing.assert_allclose(output[Channel.heating].values, expected, rtol=1e-9)
    np.testing.assert_array_equal(output[Channel.cooling].values, np.zeros(24))


def test_thicker_wall_insulation_never_adds_heating(simulator, true_params, hourly_weather, schedules, start):
    horizon = day_horizon(start, 3)
    totals = [
        simulator.simulate(params_with(true_params, wall_insulation=t), hourly_weather, schedules,
                           Resolution.hourly, horizon)[Channel.heating].total()
        for t in np.linspace(0.05, 0.10, 6)
    ]

    assert totals[0] > 0
    assert all(b <= a * (1 + 1e-12) for a, b in zip(totals, totals[1:]))


def test_higher_heating_setpoint_never_saves_heating(simulator, true_params, hourly_weather, schedules, start):
    horizon = day_horizon(start, 3)
    totals = [
        simulator.simulate(params_with(true_params, heating_setpoint=t), hourly_weather, schedules,
                           Resolution.hourly, horizon)[Channel.heating].total()
        for t in np.linspace(18.0, 24.0, 7)
    ]

    assert all(b >= a * (1 - 1e-12) for a, b in zip(totals, totals[1:]))
    assert totals[-1] > totals[0]


def test_unstable_step_is_refused(true_params, hourly_weather, schedules, start):
    simulator = RCSimulator.setup({'capacitance': 1.0e3})

    with pytest.raises(SimulationError, match='unstable'):
        simulator.simulate(true_params, hourly_weather, schedules, Resolution.hourly, day_horizon(start))


def test_electricity_and_dhw_ignore_the_envelope(simulator, true_params, hourly_weather, schedules, start):
    horizon = day_horizon(start, 3)
    base = simulator.simulate(true_params, hourly_weather, schedules, Resolution.hourly, horizon)
    changed = simulator.simulate(
        params_with(true_params, heating_setpoint=23.0, wall_insulation=0.1, glass_dirt=0.5),
        hourly_weather, schedules, Resolution.hourly, horizon,
    )

    np.testing.assert_array_equal(base[Channel.electricity].values, changed[Channel.electricity].values)
    np.testing.assert_array_equal(base[Channel.dhw].values, changed[Channel.dhw].values)

    more_appliances = simulator.simulate(params_with(true_params, appliance_density=45.0),
                                    hourly_weather, schedules, Resolution.hourly, horizon)
    np.testing.assert_array_equal(base[Channel.dhw].values, more_appliances[Channel.dhw].values)
    assert more_appliances[Channel.electricity].total() > base[Channel.electricity].total()


def test_heating_and_cooling_never_overlap(simulator, true_params, hourly_weather, schedules, start):
    output = simulator.simulate(true_params, hourly_weather, schedules, Resolution.hourly, day_horizon(start, 3))

    heating = output[Channel.heating].values
    cooling = output[Channel.cooling].values
    assert (heating >= 0).all() and (cooling >= 0).all()
    assert (heating * cooling == 0).all()
    assert heating.sum() > 0


def test_runs_are_deterministic(simulator, true_params, hourly_weather, schedules, start):
    a = simulator.simulate(true_params, hourly_weather, schedules, Resolution.hourly, day_horizon(start, 3))
    b = simulator.simulate(true_params, hourly_weather, schedules, Resolution.hourly, day_horizon(start, 3))

    for channel in Channel:
        np.testing.assert_array_equal(a[channel].values, b[channel].values)
    np.testing.assert_array_equal(a.zone_temperature, b.zone_temperature)


def test_post_aggregate(simulator, true_params, hourly_weather, schedules, start):
    hourly = simulator.simulate(true_params, hourly_weather, schedules, Resolution.hourly, day_horizon(start, 3))
    daily = post_aggregate(hourly, Resolution.daily)

    assert daily.resolution is Resolution.daily
    for channel in Channel:
        np.testing.assert_allclose(daily[channel].values, hourly[channel].values.reshape(3, 24).sum(axis=1))
    np.testing.assert_allclose(daily.zone_temperature, hourly.zone_temperature.reshape(3, 24).mean(axis=1))

    with pytest.raises(SimulationError):
        post_aggregate(hourly, Resolution.min15)
    with pytest.raises(SimulationError):
        post_aggregate(daily, Resolution.monthly)


def test_inverted_setpoints_fail(simulator, true_params, hourly_weather, schedules, start):
    space = true_params.space.with_overrides({'heating_setpoint': [18.0, 26.0]})
    values = true_params.as_dict()
    values.update(heating_setpoint=25.5, cooling_setpoint=24.5)

    with pytest.raises(SimulationError):
        simulator.simulate(space.vector(values), hourly_weather, schedules, Resolution.hourly, day_horizon(start))


def test_weather_must_match_the_timestep(simulator, true_params, hourly_weather, schedules, start):
    with pytest.raises(SimulationError):
        simulator.simulate(true_params, hourly_weather, schedules, Resolution.min1, day_horizon(start))

    with pytest.raises(SimulationError):
        simulator.simulate(true_params, hourly_weather, schedules, Resolution.daily, day_horizon(start))


def test_ground_truth_without_noise_is_the_simulation(simulator, true_params, minute_weather, schedules, start):
    horizon = day_horizon(start)
    measured = synthesize_ground_truth(simulator, true_params, minute_weather, schedules, horizon)
    output = simulator.simulate(true_params, minute_weather, schedules, Resolution.min1, horizon)

    for channel in Channel:
        assert measured[channel].resolution is Resolution.min1
        np.testing.assert_array_equal(measured[channel].values, output[channel].values)
        assert measured[channel].n_missing == 0


def test_ground_truth_gaps_are_shared(simulator, true_params, minute_weather, schedules, start):
    measured = synthesize_ground_truth(simulator, true_params, minute_weather, schedules, day_horizon(start),
                                       seed=3, gaps=['1x2h'])

    mask = measured[Channel.heating].missing
    assert mask.sum() == 120
    run = np.flatnonzero(mask)
    assert run[-1] - run[0] == 119
    for channel in Channel:
        np.testing.assert_array_equal(measured[channel].missing, mask)


def test_ground_truth_noise_follows_the_seed(simulator, true_params, minute_weather, schedules, start):
    horizon = day_horizon(start)
    a = synthesize_ground_truth(simulator, true_params, minute_weather, schedules, horizon, noise_level=0.1, seed=1)
    b = synthesize_ground_truth(simulator, true_params, minute_weather, schedules, horizon, noise_level=0.1, seed=1)
    c = synthesize_ground_truth(simulator, true_params, minute_weather, schedules, horizon, noise_level=0.1, seed=2)

    np.testing.assert_array_equal(a[Channel.electricity].values, b[Channel.electricity].values)
    assert not np.array_equal(a[Channel.electricity].values, c[Channel.electricity].values)


def test_parse_gap_spec():
    assert parse_gap_spec('1x4h') == [14400]
    assert parse_gap_spec('3x30m') == [1800, 1800, 1800]

    with pytest.raises(ConfigError):
        parse_gap_spec('four hours')


def test_setup_validates_building_settings():
    simulator = RCSimulator.setup({'floor_area': 120})
    assert simulator.spec.floor_area == 120.0

    with pytest.raises(ConfigError):
        RCSimulator.setup({'floor_area': -5})
