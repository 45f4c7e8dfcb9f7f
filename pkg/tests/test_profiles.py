import logging

import numpy as np
import pandas as pd
import pytest

from tempocal.errors import ClusteringError, ScheduleError
from tempocal.models import Channel, DailyMatrix, Resolution, Role
from tempocal.profiles import (
    ELECTRIC_ROLES,
    RoleSchedule,
    best_k,
    build_schedules,
    kmedoids,
    nominal_schedule,
    nominal_schedule_set,
    read_schedules,
    select_k,
    silhouette,
    synthetic_schedules,
    write_schedules,
)


def planted(seed, clusters=3, per_cluster=12, dims=24, separation=10.0, spread=0.1):
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, 1.0, (clusters, dims))
    centers *= separation / np.min([
        np.linalg.norm(a - b) for i, a in enumerate(centers) for b in centers[i + 1:]
    ])
    labels = np.repeat(np.arange(clusters), per_cluster)
    points = centers[labels] + rng.normal(0.0, spread / np.sqrt(dims), (len(labels), dims))
    return points, labels


def daily_matrix(values, start='2023-01-02', resolution=Resolution.hourly, excluded=None):
    values = np.asarray(values, dtype=np.float64)
    if excluded is None:
        excluded = np.isnan(values).any(axis=1)
    return DailyMatrix(values, np.asarray(excluded), pd.Timestamp(start, tz='UTC'), resolution, Channel.electricity)


def test_kmedoids_recovers_planted_clusters():
    points, truth = planted(0)
    result = kmedoids(points, 3, seed=1)

    assert len(result.medoids) == 3
    assert set(result.medoids.tolist()) <= set(range(len(points)))
    # same partition up to label names
    for cluster in range(3):
        assert len(set(result.labels[truth == cluster].tolist())) == 1
    assert len(set(result.labels.tolist())) == 3


def test_kmedoids_cost_never_increases():
    rng = np.random.default_rng(4)
    points = rng.random((40, 6))
    result = kmedoids(points, 4, seed=2, trace=True)

    assert len(result.history) >= 1
    assert all(b <= a + 1e-9 for a, b in zip(result.history, result.history[1:]))
    assert result.cost == pytest.approx(result.history[-1])
    assert result.cost == pytest.approx(kmedoids(points, 4, seed=2).cost)


def test_kmedoids_with_k_equal_to_n():
    points = np.random.default_rng(7).random((5, 3))
    result = kmedoids(points, 5)

    assert result.cost == 0.0
    np.testing.assert_array_equal(result.medoids, np.arange(5))
    np.testing.assert_array_equal(result.labels, np.arange(5))


def test_kmedoids_is_locally_optimal():
    rng = np.random.default_rng(5)
    points = rng.random((25, 3))
    result = kmedoids(points, 3, seed=0)
    d = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)

    for position in range(3):
        for candidate in range(len(points)):
            if candidate in result.medoids:
                continue
            medoids = result.medoids.copy()
            medoids[position] = candidate
            assert d[:, medoids].min(axis=1).sum() >= result.cost - 1e-9


def test_kmedoids_is_reproducible():
    rng = np.random.default_rng(6)
    points = rng.random((30, 8))

    a = kmedoids(points, 4, seed=3)
    b = kmedoids(points, 4, seed=3)
    np.testing.assert_array_equal(a.medoids, b.medoids)
    np.testing.assert_array_equal(a.labels, b.labels)


def test_kmedoids_rejects_bad_k():
    with pytest.raises(ClusteringError):
        kmedoids(np.zeros((3, 2)), 4)


def test_select_k_finds_planted_count():
    for seed in range(20):
        points, _ = planted(seed)
        assert select_k(points, 2, 10, seed=seed) == 3


def test_silhouette_needs_two_clusters():
    with pytest.raises(ClusteringError):
        silhouette(np.zeros((4, 2)), np.zeros(4, dtype=int))


def test_silhouette_of_two_tight_pairs():
    points = np.array([[0.0], [1.0], [10.0], [11.0]])
    # a = 1 everywhere, b is the mean distance to the other pair
    expected = np.mean([1 - 1 / 10.5, 1 - 1 / 9.5, 1 - 1 / 9.5, 1 - 1 / 10.5])

    assert silhouette(points, np.array([0, 0, 1, 1])) == pytest.approx(expected)
    assert silhouette(points, np.array([0, 0, 1, 1])) == pytest.approx(0.9, abs=0.01)


def test_silhouette_of_identical_points_is_zero():
    assert silhouette(np.ones((4, 3)), np.array([0, 0, 1, 1])) == 0.0


def test_silhouette_of_singletons_is_zero():
    points = np.arange(4, dtype=np.float64)[:, None]
    assert silhouette(points, np.arange(4)) == 0.0


def test_best_k_prefers_smaller_on_ties():
    assert best_k({2: 0.5, 3: 0.7, 4: 0.7}) == 3


def test_build_schedules_normalizes_to_peak():
    points, _ = planted(1, per_cluster=5)
    points -= points.min()
    schedules = build_schedules(daily_matrix(points), k_min=2, k_max=6, seed=0)

    assert set(schedules.roles) == set(ELECTRIC_ROLES)
    schedule = schedules[Role.appliances]
    assert schedule.chosen_k == 3
    assert schedule.profiles.max() == 1.0
    assert schedule.profiles.min() >= 0.0
    assert len(schedule.assignment) == len(points)
    assert set(schedule.scores) == set(range(2, 7))


def test_excluded_days_join_the_nearest_cluster():
    low = np.tile(np.linspace(0.1, 0.2, 24), (4, 1))
    high = np.tile(np.linspace(0.8, 1.0, 24), (4, 1))
    gap = high[0].copy()
    gap[5:9] = np.nan
    values = np.vstack((low, high, gap[None, :]))

    schedule = build_schedules(daily_matrix(values), (Role.dhw,), k_min=2, k_max=4)[Role.dhw]

    assert schedule.assignment[-1] == schedule.assignment[4]
    assert schedule.assignment[-1] != schedule.assignment[0]


def test_few_days_use_a_single_profile(caplog):
    values = np.abs(np.random.default_rng(0).random((2, 24)))
    schedule = build_schedules(daily_matrix(values), k_min=2)[Role.lighting]

    assert schedule.chosen_k == 1
    assert 'single profile' in caplog.text


def test_expand_holds_coarse_steps():
    schedule = RoleSchedule(Resolution.hourly, np.linspace(0, 1, 24))
    fine = schedule.expand(pd.Timestamp('2023-01-02', tz='UTC'), 96, Resolution.min15)

    np.testing.assert_array_equal(fine, np.repeat(np.linspace(0, 1, 24), 4))


def test_expand_means_onto_coarse_steps():
    schedule = RoleSchedule(Resolution.hourly, np.linspace(0, 1, 24))
    coarse = schedule.expand(pd.Timestamp('2023-01-02', tz='UTC'), 4, Resolution.hour6)

    np.testing.assert_allclose(coarse, np.linspace(0, 1, 24).reshape(4, 6).mean(axis=1))


def test_expand_follows_day_assignment():
    profiles = np.vstack((np.zeros(4), np.ones(4)))
    schedule = RoleSchedule(Resolution.hour6, profiles, assignment=[0, 1, 0], start='2023-01-02')

    values = schedule.expand(pd.Timestamp('2023-01-02', tz='UTC'), 72, Resolution.hourly)
    np.testing.assert_array_equal(values, np.repeat([0.0, 1.0, 0.0], 24))

    with pytest.raises(ScheduleError):
        schedule.expand(pd.Timestamp('2023-01-04', tz='UTC'), 48, Resolution.hourly)


def test_schedule_values_must_be_fractions():
    with pytest.raises(ScheduleError):
        RoleSchedule(Resolution.hourly, np.full(24, 1.5))

    with pytest.raises(ScheduleError):
        RoleSchedule(Resolution.hourly, np.ones(23))


def test_nominal_schedules(caplog):
    schedules = nominal_schedule_set(Resolution.monthly)
    assert schedules.missing_roles() == []
    assert schedules[Role.infiltration].profiles.min() == 1.0
    assert 'mined profiles expected' not in caplog.text

    with caplog.at_level(logging.WARNING, logger='tempocal.profiles'):
        nominal_schedule(Role.appliances, Resolution.min1)
    assert 'mined profiles expected' in caplog.text


def test_synthetic_schedules_shift_weekends():
    schedules = synthetic_schedules('2023-01-02', 7, seed=0, variability=0.0)
    profiles = schedules[Role.appliances].day_profiles()

    assert profiles.shape == (7, 1440)
    np.testing.assert_allclose(profiles[0], profiles[1])
    np.testing.assert_allclose(profiles[5], np.roll(profiles[0], 120))
    assert schedules[Role.occupancy] is schedules[Role.lighting]


def test_schedule_files(tmp_path):
    points, _ = planted(2, per_cluster=4)
    schedules = build_schedules(daily_matrix(points - points.min()), k_min=2, k_max=4)
    written = write_schedules(schedules, tmp_path)

    assert {p.name for p in written} >= {'appliances.csv', 'appliances_days.csv', 'schedules.json'}

    loaded = read_schedules(tmp_path)
    for role in ELECTRIC_ROLES:
        np.testing.assert_allclose(loaded[role].profiles, schedules[role].profiles)
        np.testing.assert_array_equal(loaded[role].assignment, schedules[role].assignment)
