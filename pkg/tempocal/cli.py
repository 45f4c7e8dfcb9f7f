import argparse
import asyncio
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import pandas as pd
from natsort import natsorted

from ._version import __fulltitle__, __version__
from .bundle import Bundle, prepare_bundle
from .config import CONFIG_FILENAME, TempocalConfig, load_config
from .dynamic import Dynamic
from .engine import CalibrationContext, Engine, ResolutionMatrix, cross_evaluate, history_frame, prior_report, simulation_timestep
from .errors import BatchError, ConfigError, DataError, SimulationError
from .logging import configure_logger, resolution_logger
from .models import Channel, MeteredSeries, Resolution, as_utc
from .profiles import synthetic_schedules
from .session import MANIFEST_FILENAME, RunSession, announce
from .simulators import synthesize_ground_truth
from .timeseries import write_series_csv
from .util import wrap_async
from .weather import secondary_weather, synthetic_weather, with_weather_gaps, write_weather_csv

__all__ = [
    'main',
    'run',
    'parse_args',
    'cmd_prepare',
    'cmd_calibrate',
    'cmd_synth',
    'cmd_report',
    'EXIT_OK',
    'EXIT_VALIDATION',
    'EXIT_RUNTIME',
]

log = logging.getLogger('tempocal.cli')

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _resolution_list(value: str) -> list[Resolution]:
    try:
        return sorted({Resolution.parse(name) for name in value.split(',') if name.strip()})
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('-c', '--config', help=f'run configuration (default: $TEMPOCAL_CONFIG or {CONFIG_FILENAME} search)')
    common.add_argument('--seed', type=int, help='overrides the configured seed')
    common.add_argument('--resolutions', type=_resolution_list, help='comma separated, e.g. min1,hourly')
    common.add_argument('--jobs', type=int, help='worker processes for batch simulation')
    common.add_argument('-o', '--out', help='output directory')
    common.add_argument('--log-level', default='INFO', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])

    parser = argparse.ArgumentParser(prog='tempocal', description=f'{__fulltitle__} {__version__}')
    parser.add_argument('--version', action='version', version=f'{__fulltitle__} {__version__}')
    commands = parser.add_subparsers(dest='command', required=True, metavar='<command>')

    commands.add_parser('prepare', parents=[common],
                        help='infill, split, aggregate and mine profiles into a data bundle')

    calibrate = commands.add_parser('calibrate', parents=[common],
                                    help='calibrate at every requested resolution and cross-evaluate at one minute')
    calibrate.add_argument('--bundle', help='prepared bundle (default: paths.bundle)')

    commands.add_parser('synth', parents=[common],
                        help='generate a one-minute ground-truth dataset from the configured true parameters')

    report = commands.add_parser('report', parents=[common], help='print the grids of a result directory')
    report.add_argument('results', nargs='?', help='result directory (default: paths.output)')

    return parser.parse_args(argv)


def _config(args: argparse.Namespace) -> TempocalConfig:
    config = load_config(args.config)

    if args.resolutions is not None:
        config.resolutions = args.resolutions

    return config


async def cmd_prepare(config: TempocalConfig, args: argparse.Namespace) -> int:
    await prepare_bundle(config, args.out)
    return EXIT_OK


def _calibratable(measurements: dict[Channel, MeteredSeries], resolution: Resolution):
    kept, excluded = {}, []
    for channel, series in measurements.items():
        observed = series.observed()
        if len(observed) == 0 or observed.mean() == 0:
            resolution_logger(resolution).warning(
                '%s has no consumption at %s; not calibratable', channel, resolution)
            excluded.append(channel)
        else:
            kept[channel] = series

    return kept, tuple(excluded)


def _best_frame(results) -> pd.DataFrame:
    rows = []
    for resolution, result in sorted(results.items()):
        for name, value in result.best.as_dict().items():
            rows.append((resolution.label, name, value))
    return pd.DataFrame(rows, columns=['resolution', 'variable', 'value'])


async def cmd_calibrate(config: TempocalConfig, args: argparse.Namespace) -> int:
    bundle = Bundle(args.bundle or config.bundle_path)
    resolutions = [r for r in config.resolutions if r in bundle.resolutions]
    skipped = [r for r in config.resolutions if r not in bundle.resolutions]
    if skipped:
        log.warning('bundle has no data for %s', ', '.join(map(str, skipped)))
    if not resolutions:
        raise ConfigError('none of the requested resolutions are in the bundle')

    engine = Engine(config.engine_config(seed=args.seed, jobs=args.jobs))
    simulator = config.simulator()
    out = Path(args.out) if args.out else config.output_path

    settings = Dynamic(config.settings)
    settings.engine = Dynamic(settings.get('engine') or {}, seed=engine.config.seed, jobs=engine.config.jobs)
    settings.resolutions = [r.label for r in resolutions]

    results = {}
    failures = {}
    async with RunSession(out, 'calibration', settings) as session:
        session.callback(announce, on_commit=True, on_rollback=True)
        for resolution in resolutions:
            try:
                measurements, excluded = _calibratable(bundle.measurements(resolution), resolution)
                context = CalibrationContext(
                    resolution=resolution,
                    simulator=simulator,
                    weather=bundle.weather(simulation_timestep(resolution)),
                    schedules=bundle.schedules(resolution),
                    measurements=measurements,
                    space=config.space,
                    excluded=excluded,
                )
                results[resolution] = await engine.calibrate(context)

            except Exception as e:
                log.exception('calibration at %s failed', resolution)
                failures[resolution.label] = f'{type(e).__name__}: {e}'

        if not results:
            raise BatchError('calibration failed at every resolution', failures)

        if Resolution.min1 in bundle.resolutions:
            matrix = await wrap_async(cross_evaluate)(
                results,
                bundle.measurements(Resolution.min1),
                bundle.weather(Resolution.min1),
                {r: bundle.schedules(r) for r in results},
                simulator,
            )
            await session.write_frame('table5.csv', matrix.table5())
        else:
            log.warning('bundle has no one-minute measurements; skipping the one-minute re-evaluation')
            matrix = ResolutionMatrix({r: result.best_report for r, result in results.items()}, {}, results)

        await session.write_frame('table4.csv', matrix.table4())
        await session.write_frame('timings.csv', matrix.timings(), volatile=True)
        await session.write_frame('priors.csv', prior_report(results))
        await session.write_frame('history.csv', history_frame(results))
        await session.write_frame('best.csv', _best_frame(results))

        for resolution, result in results.items():
            if result.mixture is not None:
                await session.write_json(f'mixtures/{resolution}.json', result.mixture.to_dynamic())

        session.manifest.bundle = {'path': bundle.directory, 'digest': bundle.manifest.get('digest')}
        session.manifest.results = {
            r.label: {'reason': str(result.reason), 'iterations': result.iterations,
                      'excluded': [str(c) for c in result.excluded]}
            for r, result in sorted(results.items())
        }
        session.manifest.failures = failures

    return EXIT_RUNTIME if failures else EXIT_OK


async def cmd_synth(config: TempocalConfig, args: argparse.Namespace) -> int:
    synth = config.synth_settings
    seed = args.seed if args.seed is not None else synth.seed
    days = synth.days
    start = as_utc(synth.start).normalize()
    space = config.space

    truth = {v.name: 0.5 * (v.lo + v.hi) for v in space}
    truth.update({k: float(v) for k, v in (synth.true_parameters or {}).items()})
    try:
        params = space.vector(truth)
    except SimulationError as e:
        raise ConfigError(f'invalid true parameters: {e}') from e

    gaps = synth.gaps or []
    if isinstance(gaps, str):
        gaps = [gaps]

    out = Path(args.out) if args.out else config.home / 'synthetic'
    simulator = config.simulator()
    site = config.site

    async with RunSession(out, 'synth', config.settings) as session:
        session.callback(announce, on_commit=True, on_rollback=True)
        weather = await wrap_async(synthetic_weather)(site, start, days, seed)
        schedules = await wrap_async(synthetic_schedules)(start, days, seed)

        log.info('simulating %d days of one-minute ground truth', days)
        measured = await wrap_async(synthesize_ground_truth)(
            simulator, params, weather, schedules, (start, start + pd.Timedelta(days=days)),
            synth.noise_level, seed, gaps,
        )

        for channel, series in measured.items():
            path = session.path('measurements', f'{channel}.csv')
            await wrap_async(write_series_csv)(series, path)
            session.record(path)

        primary = with_weather_gaps(weather, seed)
        for name, series in (('primary', primary), ('secondary', secondary_weather(weather, seed + 1))):
            path = session.path('weather', f'{name}.csv')
            await wrap_async(write_weather_csv)(series, path)
            session.record(path)

        await session.write_json('truth.json', {
            'parameters': params.as_dict(),
            'noise_level': synth.noise_level,
            'gaps': list(gaps),
            'seed': seed,
            'start': start,
            'days': days,
        })

        await session.write_json(CONFIG_FILENAME, {
            'paths': {
                'measurements': {str(channel): f'measurements/{channel}.csv' for channel in Channel},
                'weather_primary': 'weather/primary.csv',
                'weather_secondary': 'weather/secondary.csv',
            },
            'site': {'latitude': site.latitude, 'longitude': site.longitude},
            'simulator': config.settings.get('simulator', 'rc'),
            'building': config.settings.get('building') or {},
        })

    log.info('synthetic dataset written to %s', out)
    return EXIT_OK


def _wide(frame: pd.DataFrame) -> pd.DataFrame:
    wide = frame.pivot(index='resolution', columns='channel', values=['cvrmse', 'nmbe'])
    wide.columns = [f'{channel}_{metric}' for metric, channel in wide.columns]
    order = [r.label for r in Resolution if r.label in wide.index]
    return wide.loc[order].reset_index()


async def cmd_report(config: Optional[TempocalConfig], args: argparse.Namespace) -> int:
    if args.results:
        directory = Path(args.results)
    elif args.out:
        directory = Path(args.out)
    elif config is not None:
        directory = config.output_path
    else:
        raise ConfigError('no result directory given')

    try:
        manifest = Dynamic.from_file(directory / MANIFEST_FILENAME)
    except FileNotFoundError:
        raise DataError(f'{directory}: no {MANIFEST_FILENAME}') from None

    print(f'{directory}: {manifest.kind} run, tempocal {manifest.version}, {manifest.status}')
    for name, result in sorted((manifest.get('results') or {}).items(), key=lambda x: Resolution.parse(x[0]).rank):
        print(f'  {name}: {result["reason"]} after {result["iterations"]} iterations')
    for name, error in (manifest.get('failures') or {}).items():
        print(f'  {name}: failed ({error})')

    for table, title in (('table4', 'in-resolution fit'), ('table5', 'one-minute fit')):
        path = directory / f'{table}.csv'
        if not path.exists():
            continue
        wide = _wide(pd.read_csv(path))
        wide.to_csv(directory / f'{table}_wide.csv', index=False, lineterminator='\n')
        print(f'\n{title} (%):')
        print(wide.to_string(index=False, float_format=lambda x: f'{x:.2f}'))

    for name in ('timings.csv', 'priors.csv'):
        path = directory / name
        if path.exists():
            print(f'\n{name}:')
            print(pd.read_csv(path).to_string(index=False))

    print('\nartifacts:')
    for name in natsorted(manifest.get('artifacts') or {}):
        print(f'  {name}')

    return EXIT_OK


COMMANDS = {
    'prepare': cmd_prepare,
    'calibrate': cmd_calibrate,
    'synth': cmd_synth,
    'report': cmd_report,
}


async def run(args: argparse.Namespace) -> int:
    try:
        config = _config(args)
    except ConfigError:
        if args.command != 'report' or not (args.results or args.out):
            raise
        config = None

    level = getattr(logging, args.log_level)
    configure_logger('tempocal', config.log_file if config is not None else None, level, args.command)

    return await COMMANDS[args.command](config, args)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parse_args(argv)

    try:
        return asyncio.run(run(args))

    except (ConfigError, DataError) as e:
        print(f'error: {e}', file=sys.stderr)
        return EXIT_VALIDATION

    except Exception as e:
        log.debug('unhandled error', exc_info=True)
        print(f'error: {type(e).__name__}: {e}', file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == '__main__':
    sys.exit(main())
