import numpy as np
import pandas as pd
import pytest

from tempocal.errors import AlignmentError, DataError, ResolutionError
from tempocal.models import Channel, MeteredSeries, Resolution
from tempocal.timeseries import (
    aggregate,
    align,
    find_gaps,
    infill_linear,
    mean_aggregate,
    read_series_csv,
    reshape_daily,
    write_series_csv,
)


def test_aggregate_sums_covered_steps(make_series):
    series = make_series(np.arange(1, 25))

    hour6 = aggregate(series, Resolution.hour6)
    assert hour6.resolution is Resolution.hour6
    np.testing.assert_array_equal(hour6.values, [21, 57, 93, 129])

    daily = aggregate(series, Resolution.daily)
    np.testing.assert_array_equal(daily.values, [300])


def test_aggregate_missing_is_contagious(make_series):
    values = np.ones(24)
    values[7] = np.nan
    hour6 = aggregate(make_series(values), Resolution.hour6)

    np.testing.assert_array_equal(hour6.missing, [False, True, False, False])
    assert np.isnan(hour6.values[1])
    assert hour6.values[0] == 6.0


def test_aggregate_conserves_energy_and_composes(make_series):
    rng = np.random.default_rng(3)
    for _ in range(50):
        series = make_series(rng.random(2 * 1440), Resolution.min1)

        hourly = aggregate(series, Resolution.hourly)
        assert hourly.total() == pytest.approx(series.total(), rel=1e-12)

        direct = aggregate(series, Resolution.daily)
        composed = aggregate(aggregate(hourly, Resolution.hour6), Resolution.daily)
        np.testing.assert_allclose(composed.values, direct.values, rtol=1e-12)


def test_aggregate_drops_trailing_partial_interval(make_series, caplog):
    series = make_series(np.ones(30))
    hour6 = aggregate(series, Resolution.hour6)

    assert len(hour6) == 5
    assert 'trailing' in caplog.text


def test_aggregate_monthly_keeps_partial_month(make_series):
    start = pd.Timestamp('2023-01-01', tz='UTC')
    days = 31 + 10
    series = make_series(np.ones(days * 24), start=start)

    monthly = aggregate(series, Resolution.monthly)
    np.testing.assert_array_equal(monthly.values, [31 * 24, 10 * 24])
    assert monthly.end == pd.Timestamp('2023-03-01', tz='UTC')


def test_aggregate_rejects_finer_target(make_series):
    with pytest.raises(ResolutionError):
        aggregate(make_series(np.ones(24)), Resolution.min15)


def test_aggregate_rejects_misaligned_start(make_series, start):
    series = make_series(np.ones(24), start=start + pd.Timedelta(hours=1))
    with pytest.raises(ResolutionError):
        aggregate(series, Resolution.hour6)


def test_mean_aggregate(start):
    temperature = np.repeat([20.0, 22.0], 6)
    np.testing.assert_allclose(mean_aggregate(temperature, start, Resolution.hourly, Resolution.hour6), [20.0, 22.0])


def test_infill_fills_short_gaps_only(make_series):
    values = np.arange(20, dtype=np.float64)
    values[3:5] = np.nan      # 2 h
    values[10:15] = np.nan    # 5 h
    series = make_series(values)

    filled = infill_linear(series)

    np.testing.assert_allclose(filled.values[3:5], [3.0, 4.0])
    assert filled.missing[10:15].all()
    assert filled.n_missing == 5

    gaps = find_gaps(filled)
    assert gaps == [(series.timestamps()[10], 5 * 3600)]


def test_infill_keeps_edge_gaps(make_series):
    values = np.arange(10, dtype=np.float64)
    values[:2] = np.nan
    values[-1] = np.nan

    filled = infill_linear(make_series(values))
    assert filled.missing.tolist() == [True, True] + [False] * 7 + [True]


def test_infill_needs_observations(make_series):
    with pytest.raises(DataError):
        infill_linear(make_series([np.nan] * 5))


def test_align_drops_missing_measurements(make_series):
    measured = make_series([1.0, np.nan, 3.0])
    simulated = make_series([1.5, 2.0, 2.5])

    pair = align(measured, simulated)
    assert pair.count == 2
    np.testing.assert_array_equal(pair.simulated, [1.5, 2.5])


def test_align_rejects_mismatched_series(make_series):
    with pytest.raises(AlignmentError):
        align(make_series([1.0, 2.0]), make_series([1.0, 2.0], channel=Channel.cooling))

    with pytest.raises(AlignmentError):
        align(make_series([1.0, 2.0]), make_series([1.0, 2.0, 3.0]))


def test_reshape_daily_flags_days_with_missing_steps(make_series):
    values = np.ones(3 * 24)
    values[30] = np.nan
    matrix = reshape_daily(make_series(values))

    assert matrix.values.shape == (3, 24)
    assert matrix.excluded.tolist() == [False, True, False]
    assert matrix.day_index.tolist() == [0, 2]


def test_reshape_daily_rejects_partial_days(make_series):
    with pytest.raises(DataError):
        reshape_daily(make_series(np.ones(30)))


def test_series_csv(tmp_path, make_series):
    values = np.array([0.5, np.nan, 1.25, 2.0])
    path = tmp_path / 'heating.csv'
    write_series_csv(make_series(values, Resolution.min15), path)

    assert path.read_text().splitlines()[:3] == [
        'timestamp,value',
        '2023-01-02T00:00:00Z,0.5',
        '2023-01-02T00:15:00Z,',
    ]

    series = read_series_csv(path, Channel.heating)
    assert series.resolution is Resolution.min15
    assert series.missing.tolist() == [False, True, False, False]


def test_series_csv_reports_line_numbers(tmp_path):
    path = tmp_path / 'dhw.csv'
    path.write_text(
        'timestamp,value\n'
        '2023-01-02T00:00:00Z,1\n'
        '2023-01-02T01:00:00Z,1\n'
        '2023-01-02T03:00:00Z,1\n'
    )
    with pytest.raises(DataError) as error:
        read_series_csv(path, Channel.dhw)
    assert error.value.line == 4

    path.write_text('timestamp,value\n2023-01-02T00:00:00Z,1\n2023-01-02T01:00:00Z,-2\n')
    with pytest.raises(DataError) as error:
        read_series_csv(path, Channel.dhw)
    assert error.value.line == 3


def test_monthly_csv_is_detected(tmp_path):
    path = tmp_path / 'monthly.csv'
    path.write_text(
        'timestamp,value\n'
        '2023-01-01T00:00:00Z,10\n'
        '2023-02-01T00:00:00Z,11\n'
        '2023-03-01T00:00:00Z,12\n'
    )
    assert read_series_csv(path, Channel.electricity).resolution is Resolution.monthly


@pytest.mark.parametrize('resolution, start', [
    (Resolution.monthly, '2023-01-01'),
    (Resolution.daily, '2023-01-02'),
])
def test_single_interval_round_trip(tmp_path, resolution, start):
    path = tmp_path / 'one.csv'
    write_series_csv(MeteredSeries(Channel.heating, pd.Timestamp(start, tz='UTC'), resolution, np.array([12.5])), path)

    with pytest.raises(DataError):
        read_series_csv(path, Channel.heating)

    loaded = read_series_csv(path, Channel.heating, resolution)
    assert loaded.resolution is resolution
    assert loaded.start == pd.Timestamp(start, tz='UTC')
    np.testing.assert_array_equal(loaded.values, [12.5])


def test_known_resolution_must_match(tmp_path):
    path = tmp_path / 'hourly.csv'
    path.write_text(
        'timestamp,value\n'
        '2023-01-01T00:00:00Z,1\n'
        '2023-01-01T01:00:00Z,2\n'
    )
    with pytest.raises(ResolutionError):
        read_series_csv(path, Channel.heating, Resolution.daily)


def test_series_rejects_negative_energy():
    with pytest.raises(DataError):
        MeteredSeries(Channel.heating, '2023-01-01', Resolution.hourly, np.array([1.0, -1.0]))
