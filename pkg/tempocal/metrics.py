"""
Goodness-of-fit measures (CVRMSE, NMBE) and the batch distance that ranks
samples during calibration.
"""

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from .errors import DataError, NotCalibratableError
from .models import AlignedPair, Channel, Metric, Resolution

__all__ = [
    'ChannelFit',
    'FitReport',
    'Thresholds',
    'DistanceScore',
    'cvrmse',
    'nmbe',
    'fit_report',
    'violations',
    'raw_violation',
    'distance',
    'reports_frame',
]

log = logging.getLogger('tempocal.metrics')

Component = tuple[Channel, Metric]


def _check(pair: AlignedPair) -> float:
    if pair.count < 2:
        raise DataError(f'at least two aligned points are needed, got {pair.count}')

    mean = float(np.mean(pair.measured))
    if mean == 0.0:
        raise NotCalibratableError('zero measured mean')
    return mean


def cvrmse(pair: AlignedPair) -> float:
    mean = _check(pair)
    error = pair.measured - pair.simulated
    return 100.0 * float(np.sqrt(np.mean(error * error))) / mean


def nmbe(pair: AlignedPair) -> float:
    """Signed; positive when the model under-predicts."""
    mean = _check(pair)
    return 100.0 * float(np.mean(pair.measured - pair.simulated)) / mean


@dataclass(frozen=True)
class ChannelFit:
    channel: Channel
    cvrmse: float
    nmbe: float
    n_points: int

    def value(self, metric: Metric) -> float:
        return self.cvrmse if metric is Metric.cvrmse else self.nmbe


@dataclass(frozen=True)
class FitReport:
    channels: dict[Channel, ChannelFit]
    excluded: tuple[Channel, ...] = ()

    def __getitem__(self, channel: Channel) -> ChannelFit:
        return self.channels[channel]

    def components(self) -> list[Component]:
        return [(channel, metric) for channel in Channel if channel in self.channels for metric in Metric]

    def value(self, channel: Channel, metric: Metric) -> float:
        return self.channels[channel].value(metric)

    def meets(self, thresholds: 'Thresholds') -> bool:
        return all(v == 0.0 for v in violations(self, thresholds).values())


@dataclass(frozen=True)
class Thresholds:
    """Per (channel, metric) targets; |NMBE| is compared against its target."""

    cvrmse: float = 30.0
    nmbe: float = 10.0
    overrides: dict[Component, float] = field(default_factory=dict)

    def target(self, channel: Channel, metric: Metric) -> float:
        if (channel, metric) in self.overrides:
            return self.overrides[(channel, metric)]
        return self.cvrmse if metric is Metric.cvrmse else self.nmbe


@dataclass(frozen=True)
class DistanceScore:
    eta_components: dict[Component, float]
    eta_hat: float
    raw: float


def fit_report(pairs: Mapping[Channel, AlignedPair]) -> FitReport:
    channels = {}
    excluded = []
    for channel, pair in pairs.items():
        try:
            channels[channel] = ChannelFit(channel, cvrmse(pair), nmbe(pair), pair.count)
        except NotCalibratableError:
            log.warning('%s has no measured consumption and is not calibratable', channel)
            excluded.append(channel)

    return FitReport(channels, tuple(excluded))


def violations(report: FitReport, thresholds: Thresholds) -> dict[Component, float]:
    """Raw eta per component: the excess over the target, 0 inside it."""

    result = {}
    for channel, metric in report.components():
        value = abs(report.value(channel, metric))
        result[(channel, metric)] = max(value - thresholds.target(channel, metric), 0.0)
    return result


def raw_violation(report: FitReport, thresholds: Thresholds) -> float:
    return float(np.sqrt(sum(v * v for v in violations(report, thresholds).values())))


def distance(reports: Sequence[Optional[FitReport]], thresholds: Thresholds) -> list[DistanceScore]:
    """
    Rescales every raw eta component to [0, 1] across the batch (constant
    components map to 0) and combines them by their Euclidean norm.
    Failed samples (None) score infinity.
    """

    valid = [i for i, report in enumerate(reports) if report is not None]
    if not valid:
        return [DistanceScore({}, np.inf, np.inf) for _ in reports]

    keys = reports[valid[0]].components()
    raw = np.array([
        [violations(reports[i], thresholds)[key] for key in keys] for i in valid
    ], dtype=np.float64).reshape(len(valid), len(keys))

    lo = raw.min(axis=0)
    span = raw.max(axis=0) - lo
    with np.errstate(divide='ignore', invalid='ignore'):
        scaled = np.where(span > 0, (raw - lo) / span, 0.0)

    scores: list[DistanceScore] = [DistanceScore({}, np.inf, np.inf) for _ in reports]
    for row, i in enumerate(valid):
        scores[i] = DistanceScore(
            eta_components=dict(zip(keys, scaled[row].tolist())),
            eta_hat=float(np.sqrt(np.sum(scaled[row] ** 2))),
            raw=float(np.sqrt(np.sum(raw[row] ** 2))),
        )

    return scores


def reports_frame(rows: Iterable[tuple[Resolution, FitReport]]) -> pd.DataFrame:
    """`resolution,channel,cvrmse,nmbe` rows; excluded channels get empty metrics."""

    records = []
    for resolution, report in rows:
        for channel in Channel:
            if channel in report.channels:
                fit = report[channel]
                records.append((resolution.label, channel.value, fit.cvrmse, fit.nmbe))
            elif channel in report.excluded:
                records.append((resolution.label, channel.value, np.nan, np.nan))

    return pd.DataFrame(records, columns=['resolution', 'channel', 'cvrmse', 'nmbe'])
