import numpy as np
import pytest
from scipy.stats import ks_2samp, truncnorm

from tempocal.errors import SamplerError, TruncationError
from tempocal.models import ParameterSpace, Variable
from tempocal.sampler import MixtureModel, fit_mixture, lhs, sample_truncated


def unit_space(n):
    return ParameterSpace(tuple(Variable(f'x{i}', f'x{i}', '-', 0.0, 1.0) for i in range(n)))


def test_lhs_stratifies_every_variable():
    space = unit_space(3)
    for m in (10, 100, 1000):
        for seed in range(20):
            design = lhs(space, m, seed)
            assert design.shape == (m, 3)
            for column in design.T:
                strata = np.floor(column * m).astype(int)
                assert sorted(strata.tolist()) == list(range(m))


def test_lhs_respects_plausible_ranges(space):
    design = lhs(space, 50, 1)
    assert space.contains(design).all()


def test_lhs_is_reproducible(space):
    np.testing.assert_array_equal(lhs(space, 20, 7), lhs(space, 20, 7))
    assert not np.array_equal(lhs(space, 20, 7), lhs(space, 20, 8))


def test_lhs_rejects_empty_batch(space):
    with pytest.raises(SamplerError):
        lhs(space, 0, 0)


def test_truncated_half_normal():
    model = MixtureModel([1.0], [[0.0]], [[[1.0]]], [0.0], [10.0])
    draws = sample_truncated(model, 100_000, seed=3)

    assert draws.shape == (100_000, 1)
    assert draws.min() >= 0.0
    assert draws.mean() == pytest.approx(np.sqrt(2.0 / np.pi), abs=0.01)


def test_truncated_draws_match_the_truncated_normal():
    model = MixtureModel([1.0], [[0.5]], [[[0.25]]], [-1.0], [1.5])
    draws = sample_truncated(model, 5000, seed=9)[:, 0]

    reference = truncnorm.rvs(-3.0, 2.0, loc=0.5, scale=0.5, size=5000, random_state=10)
    assert ks_2samp(draws, reference).pvalue > 1e-3


def test_truncated_draws_stay_in_box(space):
    means = (space.lower + space.upper) / 2.0
    covariance = np.diag((space.widths / 4.0) ** 2)
    model = MixtureModel([1.0], [means], [covariance], space.lower, space.upper)

    draws = sample_truncated(model, 500, seed=4)
    assert draws.shape == (500, len(space))
    assert space.contains(draws).all()


def test_truncation_gives_up_without_overlap():
    model = MixtureModel([1.0], [[100.0]], [[[1.0]]], [0.0], [1.0])
    with pytest.raises(TruncationError):
        sample_truncated(model, 10, seed=0)


def test_mixture_weights_are_normalized():
    model = MixtureModel([2.0, 2.0], [[0.0], [1.0]], [[[1.0]], [[1.0]]], [0.0], [1.0])
    np.testing.assert_allclose(model.weights, [0.5, 0.5])

    with pytest.raises(SamplerError):
        MixtureModel([1.0], [[0.0], [1.0]], [[[1.0]], [[1.0]]], [0.0], [1.0])


def test_fit_single_component_on_small_elite_set(space):
    rng = np.random.default_rng(5)
    centre = (space.lower + space.upper) / 2.0
    elites = centre + 0.05 * space.widths * rng.standard_normal((20, len(space)))

    model = fit_mixture(elites, space, max_components=3, seed=0)

    assert model.n_components == 1
    np.testing.assert_allclose(model.means[0], elites.mean(axis=0), rtol=1e-6)
    assert model.variables == tuple(space.names)
    assert all(b >= a - 1e-6 * abs(a) for a, b in zip(model.log_likelihood, model.log_likelihood[1:]))


def test_fit_finds_two_modes():
    space = unit_space(1)
    rng = np.random.default_rng(6)
    elites = np.concatenate((0.2 + 0.02 * rng.standard_normal(50), 0.8 + 0.02 * rng.standard_normal(50)))

    model = fit_mixture(elites[:, None], space, max_components=3, seed=0)

    assert model.n_components >= 2
    assert np.isfinite(model.bic)
    assert sorted(np.round(model.means[:, 0], 1).tolist())[0] == 0.2
    assert sorted(np.round(model.means[:, 0], 1).tolist())[-1] == 0.8


def test_fit_needs_two_elites(space):
    with pytest.raises(SamplerError):
        fit_mixture(np.atleast_2d(space.lower), space)


def test_widened_scales_covariances():
    model = MixtureModel([1.0], [[0.5]], [[[0.01]]], [0.0], [1.0])
    np.testing.assert_allclose(model.widened(4.0).covariances, [[[0.04]]])
    np.testing.assert_allclose(model.covariances, [[[0.01]]])
