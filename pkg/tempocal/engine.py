"""
Subset-simulation calibration.

Each resolution starts from a Latin hypercube batch. Every iteration ranks
the batch by the rescaled threshold violation, fits a Gaussian mixture to
the k best samples, draws a new batch from the mixture truncated to the
plausible ranges (carrying the best sample forward) and scores it. The loop
stops when a sample meets every threshold, when no (channel, metric) minimum
improved by `improvement_tol`, or after `max_iterations`.
"""

import asyncio
import logging
import math
import multiprocessing
import time
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from .errors import BatchError, SamplerError, TruncationError
from .logging import resolution_logger
from .metrics import Component, FitReport, Thresholds, distance, fit_report, raw_violation, reports_frame
from .models import Channel, MeteredSeries, ParameterSpace, ParameterVector, Resolution, WeatherSeries
from .profiles import ScheduleSet
from .sampler import MixtureModel, fit_mixture, lhs, sample_truncated
from .simulators import Horizon, SimulatorBase, post_aggregate
from .timeseries import align

__all__ = [
    'StopReason',
    'EngineConfig',
    'CalibrationContext',
    'BatchResult',
    'IterationRecord',
    'CalibrationResult',
    'ResolutionMatrix',
    'Engine',
    'simulation_timestep',
    'evaluate_batch',
    'cross_evaluate',
    'prior_report',
    'history_frame',
]

log = logging.getLogger('tempocal.engine')

# covariance growth per retry after a truncation failure
WIDEN_FACTOR = 4.0
WIDEN_RETRIES = 3


class StopReason(Enum):
    threshold_met = 'threshold-met'
    converged = 'converged'
    max_iterations = 'max-iterations'

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class EngineConfig:
    m: int = 200
    k: Optional[int] = None
    thresholds: Thresholds = field(default_factory=Thresholds)
    improvement_tol: float = 0.01
    max_iterations: int = 50
    batch_size: int = 30
    seed: int = 0
    jobs: int = 1
    max_components: int = 3

    def __post_init__(self):
        if self.k is None:
            # the mixture fit needs two elites
            object.__setattr__(self, 'k', max(2, math.ceil(0.1 * self.m)))

        if self.m < 2:
            raise ValueError(f'm must be at least 2, got {self.m}')
        if not 2 <= self.k <= self.m:
            raise ValueError(f'elite count k must lie in [2, m], got {self.k}')
        if not self.improvement_tol > 0:
            raise ValueError(f'improvement_tol must be positive, got {self.improvement_tol}')
        if self.max_iterations < 1 or self.batch_size < 1 or self.jobs < 1 or self.max_components < 1:
            raise ValueError('max_iterations, batch_size, jobs and max_components must be positive')


def simulation_timestep(resolution: Resolution) -> Resolution:
    """Resolutions coarser than hourly are aggregated from hourly simulations."""
    return resolution if resolution <= Resolution.hourly else Resolution.hourly


@dataclass(frozen=True, eq=False)
class CalibrationContext:
    """Everything a worker needs to score a parameter vector at one resolution."""

    resolution: Resolution
    simulator: SimulatorBase
    weather: WeatherSeries
    schedules: ScheduleSet
    measurements: dict[Channel, MeteredSeries]
    space: ParameterSpace
    excluded: tuple[Channel, ...] = ()

    def __post_init__(self):
        if not self.measurements:
            raise BatchError(f'{self.resolution}: no calibratable channels')

        spans = {(s.start, s.end, s.resolution) for s in self.measurements.values()}
        if len(spans) != 1:
            raise BatchError(f'{self.resolution}: measured channels cover different spans')

    @property
    def timestep(self) -> Resolution:
        return simulation_timestep(self.resolution)

    @property
    def horizon(self) -> Horizon:
        # a partially covered final month ends with the weather
        series = next(iter(self.measurements.values()))
        return series.start, min(series.end, self.weather.end)

    def evaluate(self, values: np.ndarray) -> FitReport:
        params = self.space.vector(values)
        output = self.simulator.simulate(params, self.weather, self.schedules, self.timestep, self.horizon)
        if self.resolution != self.timestep:
            output = post_aggregate(output, self.resolution)

        return fit_report({channel: align(measured, output[channel]) for channel, measured in self.measurements.items()})


_context: Optional[CalibrationContext] = None


def _install_context(context: CalibrationContext) -> None:
    global _context
    _context = context


def _evaluate_one(context: CalibrationContext, index: int, values: np.ndarray) -> tuple[int, Optional[FitReport], Optional[str]]:
    try:
        return index, context.evaluate(values), None
    except Exception as e:
        return index, None, f'{type(e).__name__}: {e}'


def _evaluate_in_worker(index: int, values: np.ndarray):
    return _evaluate_one(_context, index, values)


@dataclass(frozen=True)
class BatchResult:
    reports: list[Optional[FitReport]]
    errors: dict[int, str]

    @property
    def n_failed(self) -> int:
        return len(self.errors)


async def evaluate_batch(
    context: CalibrationContext,
    vectors: np.ndarray,
    batch_size: int = 30,
    executor: Optional[Executor] = None,
) -> BatchResult:
    """
    Scores `vectors` in waves of `batch_size` concurrent simulations.
    Results follow input order; failed simulations are reported per vector
    and only raise when every vector fails.
    """

    vectors = np.atleast_2d(vectors)
    if len(vectors) == 0:
        raise BatchError('empty batch')

    reports: list[Optional[FitReport]] = [None] * len(vectors)
    errors: dict[int, str] = {}

    for begin in range(0, len(vectors), batch_size):
        wave = range(begin, min(begin + batch_size, len(vectors)))
        if executor is None:
            outcomes = [_evaluate_one(context, i, vectors[i]) for i in wave]
        else:
            loop = asyncio.get_running_loop()
            outcomes = await asyncio.gather(*(
                loop.run_in_executor(executor, _evaluate_in_worker, i, vectors[i]) for i in wave
            ))

        for index, report, error in outcomes:
            if error is not None:
                log.warning('simulation %d failed: %s; vector %s', index, error, np.array2string(vectors[index], precision=6))
                errors[index] = error
            else:
                reports[index] = report

    if len(errors) == len(vectors):
        raise BatchError(f'all {len(vectors)} simulations failed', errors)

    return BatchResult(reports, errors)


@dataclass(frozen=True, eq=False)
class IterationRecord:
    iteration: int
    theta: dict[Component, float]
    best_violation: float
    n_failed: int
    elites: np.ndarray
    mixture: Optional[MixtureModel] = None


@dataclass(frozen=True, eq=False)
class CalibrationResult:
    resolution: Resolution
    history: list[IterationRecord]
    best: ParameterVector
    best_report: FitReport
    elites: np.ndarray
    mixture: Optional[MixtureModel]
    reason: StopReason
    wall_time: float
    n_simulations: int
    excluded: tuple[Channel, ...] = ()

    @property
    def iterations(self) -> int:
        return len(self.history) - 1


def _seed(*key: int) -> int:
    return int(np.random.SeedSequence([int(k) for k in key]).generate_state(1)[0])


def _theta(reports: Sequence[Optional[FitReport]]) -> dict[Component, float]:
    theta: dict[Component, float] = {}
    for report in reports:
        if report is None:
            continue
        for channel, metric in report.components():
            value = abs(report.value(channel, metric))
            theta[(channel, metric)] = min(value, theta.get((channel, metric), np.inf))
    return theta


def _improved(previous: Mapping[Component, float], current: Mapping[Component, float], tol: float) -> bool:
    for key, before in previous.items():
        after = current[key]
        if before > 0 and (before - after) / before >= tol:
            return True
    return False


class Engine:
    def __init__(self, config: EngineConfig):
        self.config: EngineConfig = config

    def _executor(self, context: CalibrationContext) -> Optional[ProcessPoolExecutor]:
        if self.config.jobs <= 1:
            return None

        # the context travels to each worker through the initializer
        methods = multiprocessing.get_all_start_methods()
        mp_context = multiprocessing.get_context('forkserver' if 'forkserver' in methods else 'spawn')
        return ProcessPoolExecutor(
            max_workers=self.config.jobs,
            mp_context=mp_context,
            initializer=_install_context,
            initargs=(context,),
        )

    async def evaluate_batch(self, context: CalibrationContext, vectors: np.ndarray,
                             executor: Optional[Executor] = None) -> BatchResult:
        return await evaluate_batch(context, vectors, self.config.batch_size, executor)

    def _elites(self, samples: np.ndarray, reports: Sequence[Optional[FitReport]]) -> np.ndarray:
        scores = distance(reports, self.config.thresholds)
        eta = np.array([s.eta_hat for s in scores])
        order = np.argsort(eta, kind='stable')
        valid = order[np.isfinite(eta[order])][:self.config.k]
        if len(valid) < 2:
            raise BatchError('fewer than two successful simulations to select elites from')
        return samples[valid]

    def _propose(self, mixture: MixtureModel, count: int, seed: int, log_: logging.Logger) -> np.ndarray:
        model = mixture
        for attempt in range(WIDEN_RETRIES + 1):
            try:
                return sample_truncated(model, count, _seed(seed, attempt))
            except TruncationError as e:
                if attempt == WIDEN_RETRIES:
                    raise
                log_.warning('%s; widening the mixture x%g', e, WIDEN_FACTOR)
                model = model.widened(WIDEN_FACTOR)

        raise SamplerError('unreachable')

    async def calibrate(self, context: CalibrationContext) -> CalibrationResult:
        config = self.config
        resolution = context.resolution
        space = context.space
        rlog = resolution_logger(resolution)
        started = time.perf_counter()

        rlog.info('calibrating %d variables at %s (simulated at %s): m=%d k=%d',
                  len(space), resolution, context.timestep, config.m, config.k)

        executor = self._executor(context)
        try:
            samples = lhs(space, config.m, _seed(config.seed, resolution.rank, 0, 0))
            batch = await self.evaluate_batch(context, samples, executor)
            n_simulations = len(samples)

            def best_of(samples, reports):
                violations = [np.inf if r is None else raw_violation(r, config.thresholds) for r in reports]
                i = int(np.argmin(violations))
                return violations[i], samples[i].copy(), reports[i]

            best_violation, best_values, best_report = best_of(samples, batch.reports)
            theta = _theta(batch.reports)
            elites = self._elites(samples, batch.reports)
            history = [IterationRecord(0, theta, best_violation, batch.n_failed, elites)]
            mixture = None
            reason = None

            if any(r is not None and r.meets(config.thresholds) for r in batch.reports):
                reason = StopReason.threshold_met

            iteration = 0
            while reason is None:
                iteration += 1
                mixture = fit_mixture(elites, space, config.max_components, _seed(config.seed, resolution.rank, iteration, 1))
                proposals = self._propose(mixture, config.m - 1, _seed(config.seed, resolution.rank, iteration, 2), rlog)
                samples = np.vstack((best_values[None, :], proposals))

                batch = await self.evaluate_batch(context, samples, executor)
                n_simulations += len(samples)

                candidate = best_of(samples, batch.reports)
                if candidate[0] < best_violation:
                    best_violation, best_values, best_report = candidate

                current = _theta(batch.reports)
                new_theta = {key: min(theta[key], current.get(key, np.inf)) for key in theta}
                improved = _improved(theta, new_theta, config.improvement_tol)
                theta = new_theta

                elites = self._elites(samples, batch.reports)
                history.append(IterationRecord(iteration, theta, best_violation, batch.n_failed, elites, mixture))

                rlog.info('iteration %d: best violation %.4g, %d failed, %s', iteration, best_violation, batch.n_failed,
                          ', '.join(f'{c}.{m}={v:.3g}' for (c, m), v in theta.items()))

                if any(r is not None and r.meets(config.thresholds) for r in batch.reports):
                    reason = StopReason.threshold_met
                elif not improved:
                    reason = StopReason.converged
                elif iteration >= config.max_iterations:
                    reason = StopReason.max_iterations

        finally:
            if executor is not None:
                executor.shutdown()

        wall_time = time.perf_counter() - started
        rlog.info('stopped after %d iterations (%s) in %.1f s', iteration, reason, wall_time)

        return CalibrationResult(
            resolution=resolution,
            history=history,
            best=space.vector(best_values),
            best_report=FitReport(best_report.channels, context.excluded),
            elites=elites,
            mixture=mixture,
            reason=reason,
            wall_time=wall_time,
            n_simulations=n_simulations,
            excluded=context.excluded,
        )


@dataclass(frozen=True, eq=False)
class ResolutionMatrix:
    in_resolution: dict[Resolution, FitReport]
    at_min1: dict[Resolution, FitReport]
    results: dict[Resolution, CalibrationResult]

    def table4(self) -> pd.DataFrame:
        return reports_frame(sorted(self.in_resolution.items()))

    def table5(self) -> pd.DataFrame:
        return reports_frame(sorted(self.at_min1.items()))

    def timings(self) -> pd.DataFrame:
        return pd.DataFrame([
            (r.label, result.wall_time, result.iterations, result.n_simulations, str(result.reason))
            for r, result in sorted(self.results.items())
        ], columns=['resolution', 'wall_time_s', 'iterations', 'simulations', 'stop_reason'])


def cross_evaluate(
    results: Mapping[Resolution, CalibrationResult],
    measurements: Mapping[Channel, MeteredSeries],
    weather: WeatherSeries,
    schedules: Mapping[Resolution, ScheduleSet],
    simulator: SimulatorBase,
) -> ResolutionMatrix:
    """
    Re-simulates every best vector at one minute, driven by one-minute
    weather and that resolution's schedules held over each of their steps,
    and scores it against the one-minute measurements.
    """

    at_min1 = {}
    for resolution, result in sorted(results.items()):
        channels = {c: s for c, s in measurements.items() if c in result.best_report.channels}
        series = next(iter(channels.values()))
        output = simulator.simulate(result.best, weather, schedules[resolution], Resolution.min1, (series.start, series.end))
        at_min1[resolution] = fit_report({c: align(s, output[c]) for c, s in channels.items()})
        log.info('%s model at min1: %s', resolution, ', '.join(
            f'{c} cvrmse={f.cvrmse:.3g}' for c, f in at_min1[resolution].channels.items()))

    in_resolution = {r: result.best_report for r, result in results.items()}
    return ResolutionMatrix(in_resolution, at_min1, dict(results))


def prior_report(results: Mapping[Resolution, CalibrationResult]) -> pd.DataFrame:
    """Elite-set mean, standard deviation and 5/95 percentiles per variable."""

    rows = []
    for resolution, result in sorted(results.items()):
        elites = result.elites
        if len(elites) == 0:
            raise BatchError(f'{resolution}: empty elite set')

        names = result.best.space.names
        mean = elites.mean(axis=0)
        std = elites.std(axis=0)
        p05, p95 = np.percentile(elites, [5, 95], axis=0)
        for i, name in enumerate(names):
            rows.append((resolution.label, name, mean[i], std[i], p05[i], p95[i]))

    return pd.DataFrame(rows, columns=['resolution', 'variable', 'mean', 'std', 'p05', 'p95'])


def history_frame(results: Mapping[Resolution, CalibrationResult]) -> pd.DataFrame:
    rows = []
    for resolution, result in sorted(results.items()):
        for record in result.history:
            for (channel, metric), theta in record.theta.items():
                rows.append((resolution.label, record.iteration, channel.value, metric.value, theta,
                             record.best_violation, record.n_failed))

    return pd.DataFrame(rows, columns=['resolution', 'iteration', 'channel', 'metric', 'theta',
                                       'best_violation', 'n_failed'])
