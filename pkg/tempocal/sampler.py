"""
Proposal machinery for subset simulation: Latin hypercube seeding,
Gaussian-mixture fitting on elite samples and rejection sampling of the
mixture truncated to the plausible box.
"""

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import qmc
from sklearn.exceptions import ConvergenceWarning
from sklearn.mixture import GaussianMixture

from .dynamic import Dynamic
from .errors import SamplerError, TruncationError
from .models import ParameterSpace

__all__ = [
    'MixtureModel',
    'lhs',
    'fit_mixture',
    'sample_truncated',
]

log = logging.getLogger('tempocal.sampler')

EM_MAX_ITERATIONS = 200
EM_TOLERANCE = 1e-8
REG_COVAR = 1e-6

MAX_DRAWS = 1_000_000
MIN_ACCEPTANCE = 1e-4


def lhs(space: ParameterSpace, m: int, seed) -> np.ndarray:
    """(m, n) Latin hypercube design scaled to the plausible ranges."""

    if m < 1:
        raise SamplerError(f'sample count must be positive, got {m}')

    sampler = qmc.LatinHypercube(d=len(space), seed=np.random.default_rng(seed))
    return qmc.scale(sampler.random(m), space.lower, space.upper)


@dataclass(frozen=True, eq=False)
class MixtureModel:
    """
    Full-covariance Gaussian mixture in parameter units, truncated to the
    box [lower, upper].
    """

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    variables: tuple[str, ...] = ()
    bic: float = float('nan')
    log_likelihood: list[float] = field(default_factory=list)

    def __post_init__(self):
        weights = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        covariances = np.asarray(self.covariances, dtype=np.float64).reshape(len(weights), means.shape[1], means.shape[1])

        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            weights = np.clip(weights, 0.0, None)
            if weights.sum() <= 0:
                raise SamplerError('mixture weights must have a positive sum')
            weights = weights / weights.sum()

        if means.shape[0] != len(weights):
            raise SamplerError(f'{len(weights)} weights but {means.shape[0]} component means')

        object.__setattr__(self, 'weights', weights)
        object.__setattr__(self, 'means', means)
        object.__setattr__(self, 'covariances', 0.5 * (covariances + covariances.transpose(0, 2, 1)))
        object.__setattr__(self, 'lower', np.asarray(self.lower, dtype=np.float64))
        object.__setattr__(self, 'upper', np.asarray(self.upper, dtype=np.float64))
        object.__setattr__(self, 'variables', tuple(self.variables))

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def n_dims(self) -> int:
        return self.means.shape[1]

    def widened(self, factor: float) -> 'MixtureModel':
        return MixtureModel(self.weights, self.means, self.covariances * factor, self.lower, self.upper,
                            self.variables, self.bic, list(self.log_likelihood))

    def cholesky(self) -> np.ndarray:
        factors = np.empty_like(self.covariances)
        for i, covariance in enumerate(self.covariances):
            scale = max(float(np.trace(covariance)) / self.n_dims, 1e-300)
            jitter = 0.0
            for _ in range(12):
                try:
                    factors[i] = np.linalg.cholesky(covariance + jitter * np.eye(self.n_dims))
                    break
                except np.linalg.LinAlgError:
                    jitter = scale * 1e-10 if jitter == 0.0 else jitter * 10.0
            else:
                raise SamplerError(f'covariance of component {i} is not positive semi-definite')
        return factors

    def to_dynamic(self) -> Dynamic:
        return Dynamic({
            'variables': list(self.variables),
            'weights': self.weights.tolist(),
            'means': self.means.tolist(),
            'covariances': self.covariances.tolist(),
            'lower': self.lower.tolist(),
            'upper': self.upper.tolist(),
            'bic': None if np.isnan(self.bic) else self.bic,
            'log_likelihood': list(self.log_likelihood),
        })

    @classmethod
    def from_dynamic(cls, data: Dynamic) -> 'MixtureModel':
        return cls(
            weights=data.weights,
            means=data.means,
            covariances=data.covariances,
            lower=data.lower,
            upper=data.upper,
            variables=tuple(data.get('variables', ())),
            bic=float('nan') if data.get('bic') is None else data.bic,
            log_likelihood=list(data.get('log_likelihood', [])),
        )


def _fit_em(x: np.ndarray, n_components: int, seed) -> tuple[GaussianMixture, list[float]]:
    model = GaussianMixture(
        n_components=n_components,
        covariance_type='full',
        reg_covar=REG_COVAR,
        init_params='k-means++',
        max_iter=1,
        warm_start=True,
        random_state=seed,
    )

    history: list[float] = []
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', ConvergenceWarning)
        for _ in range(EM_MAX_ITERATIONS):
            model.fit(x)
            bound = float(model.lower_bound_)
            if history and bound < history[-1] - 1e-9 * max(abs(history[-1]), 1.0):
                log.warning('EM log-likelihood decreased from %.10g to %.10g', history[-1], bound)
            history.append(bound)
            if len(history) > 1 and abs(history[-1] - history[-2]) <= EM_TOLERANCE * max(abs(history[-2]), 1e-300):
                break

    return model, history


def fit_mixture(elites: np.ndarray, space: ParameterSpace, max_components: int = 3, seed=0) -> MixtureModel:
    """
    EM-fitted Gaussian mixture on the elite set, with the component count
    chosen by BIC. Fitting happens in unit-box coordinates, so the covariance
    regularization is 1e-6 times the squared range width of each variable.
    """

    elites = np.atleast_2d(np.asarray(elites, dtype=np.float64))
    count, n = elites.shape
    if count < 2:
        raise SamplerError(f'at least two elite samples are needed, got {count}')

    widths = space.widths
    x = (elites - space.lower) / widths

    distinct = len(np.unique(x, axis=0))
    candidates = [c for c in range(1, max_components + 1) if c == 1 or (count >= c * (n + 2) and c <= distinct)]

    best: Optional[tuple[float, GaussianMixture, list[float]]] = None
    for c in candidates:
        model, history = _fit_em(x, c, seed)
        bic = float(model.bic(x))
        log.debug('mixture with %d components: bic=%.6g after %d EM iterations', c, bic, len(history))
        if best is None or bic < best[0]:
            best = (bic, model, history)

    bic, model, history = best
    scale = np.diag(widths)

    return MixtureModel(
        weights=model.weights_,
        means=space.lower + model.means_ * widths,
        covariances=np.stack([scale @ cov @ scale for cov in model.covariances_]),
        lower=space.lower,
        upper=space.upper,
        variables=tuple(space.names),
        bic=bic,
        log_likelihood=history,
    )


def sample_truncated(model: MixtureModel, m: int, seed) -> np.ndarray:
    """
    Exactly `m` mixture draws inside [lower, upper], by rejection.
    Raises TruncationError when the acceptance rate is below 1e-4 after
    1e6 draws.
    """

    if m < 1:
        raise SamplerError(f'sample count must be positive, got {m}')

    rng = np.random.default_rng(seed)
    factors = model.cholesky()

    accepted: list[np.ndarray] = []
    n_accepted = 0
    draws = 0
    while n_accepted < m:
        rate = max(n_accepted / draws, MIN_ACCEPTANCE) if draws else 1.0
        size = int(min(max(2 * (m - n_accepted) / rate, 1024), 250_000))

        components = rng.choice(model.n_components, size=size, p=model.weights)
        z = rng.standard_normal((size, model.n_dims))
        x = model.means[components] + np.einsum('kij,kj->ki', factors[components], z)

        inside = np.all((x >= model.lower) & (x <= model.upper), axis=1)
        accepted.append(x[inside])
        n_accepted += int(inside.sum())
        draws += size

        if draws >= MAX_DRAWS and n_accepted / draws < MIN_ACCEPTANCE:
            raise TruncationError(f'acceptance rate {n_accepted / draws:.2e} after {draws} draws; '
                                  'the mixture barely overlaps the plausible ranges')

    samples = np.concatenate(accepted)[:m]
    log.debug('drew %d samples with acceptance %.3f', m, n_accepted / draws)
    return samples
