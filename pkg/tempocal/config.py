import os
import re
import sys
import json
import logging
from pathlib import Path
from typing import Any, Optional, Type

import importlib
import importlib.util
import importlib.machinery

from .dynamic import Dynamic
from .engine import EngineConfig
from .errors import ConfigError
from .forms import Form, Input, validators
from .metrics import Thresholds
from .models import DEFAULT_SPACE, Channel, Metric, ParameterSpace, Resolution, Site
from .simulators import BUILTIN_SIMULATORS, SimulatorBase

__all__ = [
    'TempocalConfig',
    'load_config',
    'CONFIG_FILENAME',
]

log = logging.getLogger('tempocal.config')

CONFIG_FILENAME = 'tempocal.json'

DEFAULT_SITE = (47.4, 8.6)

RESOLUTION_NAMES = [r.label for r in Resolution]

SECTIONS = ('paths', 'site', 'building', 'parameters', 'engine', 'profiles', 'data', 'synth',
            'resolutions', 'simulator', 'log_file')


def _number(**kwargs) -> list:
    return [validators.optional(), validators.number(**kwargs)]


def _integer(label: str, minimum: int, default: Optional[int] = None) -> Input:
    return Input(label, _number(min=minimum, integer=True), default=default, cast=int)


def _forms(home: Path) -> dict[str, Form]:
    measurement_paths = Form('paths.measurements', *(
        (channel.value, Input(f'{channel} measurements', [validators.optional(), validators.path_exists(home)]))
        for channel in Channel
    ))

    return {
        'paths': Form('paths',
            ('measurements', Input('measurement csv files')),
            ('weather_primary', Input('primary weather csv', [validators.optional(), validators.path_exists(home)])),
            ('weather_secondary', Input('secondary weather csv', [validators.optional(), validators.path_exists(home)])),
            ('bundle', Input('prepared bundle directory', default='bundle')),
            ('output', Input('result directory', default='results')),
        ),
        'paths.measurements': measurement_paths,
        'site': Form('site',
            ('latitude', Input('latitude', _number(min=-90, max=90), default=DEFAULT_SITE[0], cast=float)),
            ('longitude', Input('longitude', _number(min=-180, max=180), default=DEFAULT_SITE[1], cast=float)),
        ),
        'engine': Form('engine',
            ('m', _integer('samples per iteration', 2, 200)),
            ('k', _integer('elite count', 2)),
            ('thresholds', Input('fit thresholds', default={})),
            ('improvement_tol', Input('improvement tolerance', _number(min=0, exclusive_min=True), default=0.01, cast=float)),
            ('max_iterations', _integer('iteration limit', 1, 50)),
            ('batch_size', _integer('jobs per wave', 1, 30)),
            ('seed', _integer('seed', 0, 0)),
            ('jobs', _integer('worker processes', 1, 1)),
            ('max_components', _integer('mixture components', 1, 3)),
        ),
        'profiles': Form('profiles',
            ('k_min', _integer('smallest cluster count', 2, 2)),
            ('k_max', _integer('largest cluster count', 2, 10)),
            ('seed', _integer('clustering seed', 0, 0)),
        ),
        'data': Form('data',
            ('max_gap_seconds', _integer('longest interpolated gap', 0, 10800)),
        ),
        'synth': Form('synth',
            ('start', Input('first day', default='2023-01-01')),
            ('days', _integer('length in days', 1, 365)),
            ('noise_level', Input('lognormal noise sigma', _number(min=0), default=0.0, cast=float)),
            ('gaps', Input('gap specs', default=[])),
            ('seed', _integer('seed', 0, 0)),
            ('true_parameters', Input('true parameter values', default={})),
        ),
    }


class TempocalConfig:
    PLUGIN_FILE_REGEX = re.compile(r'^(?P<simulator_id>[^\.]+)\.py$', re.IGNORECASE)

    def __init__(self, path: str | os.PathLike):
        self.path: Path = Path(path).expanduser().resolve()
        self.home: Path = self.path.parent

        if self.path.suffix == '.json':
            try:
                self.settings: Dynamic = Dynamic.from_file(self.path)
            except json.JSONDecodeError as e:
                raise ConfigError(f'{self.path}: invalid json: {e}') from e
        else:
            self.settings = Dynamic.from_module(self.path)

        self.simulators: dict[str, Type[SimulatorBase]] = dict(BUILTIN_SIMULATORS)
        self._plugin_path: Path = (self.home / 'plugins').resolve()
        self._plugin_package: str = '_tempocal_simulator'
        self._plugins_loaded = False

        self._validate()

    @classmethod
    def from_settings(cls, settings: dict[str, Any], home: str | os.PathLike = '.') -> 'TempocalConfig':
        config = cls.__new__(cls)
        config.path = Path(home).resolve() / CONFIG_FILENAME
        config.home = Path(home).resolve()
        config.settings = Dynamic.from_json(json.dumps(settings))
        config.simulators = dict(BUILTIN_SIMULATORS)
        config._plugin_path = (config.home / 'plugins').resolve()
        config._plugin_package = '_tempocal_simulator'
        config._plugins_loaded = False
        config._validate()
        return config

    def _validate(self) -> None:
        unknown = [key for key in self.settings if key not in SECTIONS]
        if unknown:
            raise ConfigError('invalid configuration', {key: ['unknown key'] for key in unknown})

        forms = _forms(self.home)
        errors: dict[str, list[str]] = {}
        self.values: Dynamic = Dynamic()

        for name, form in forms.items():
            section = self.settings.get_path(*name.split('.'), default=Dynamic())
            if not isinstance(section, dict):
                errors[name] = ['expected an object']
                continue
            try:
                self.values[name] = form.validated(section)
            except ConfigError as e:
                errors.update(e.errors)

        if not errors:
            try:
                self.resolutions = self._resolutions()
                self.thresholds = self._thresholds()
                self.space = self._space()
            except ConfigError as e:
                errors.update(e.errors or {e.args[0]: ['invalid']})

        if errors:
            raise ConfigError(f'{self.path}: invalid configuration', errors)

    def _resolutions(self) -> list[Resolution]:
        names = self.settings.get('resolutions')
        if names is None:
            return list(Resolution)

        form = Form('config', ('resolutions', Input('resolutions', [validators.members_of(RESOLUTION_NAMES)])))
        value = form.validated({'resolutions': names}).resolutions
        if isinstance(value, str):
            value = value.split(',')
        return sorted({Resolution.parse(name) for name in value})

    def _thresholds(self) -> Thresholds:
        raw = self.values['engine'].thresholds or {}
        if not isinstance(raw, dict):
            raise ConfigError('invalid thresholds', {'engine.thresholds': ['expected an object']})

        defaults = Thresholds()
        overrides = {}
        errors = {}

        for key, value in raw.items():
            if key in ('cvrmse', 'nmbe'):
                if isinstance(value, bool) or not isinstance(value, (int, float)) or value < 0:
                    errors[f'engine.thresholds.{key}'] = ['expected a non-negative number']
                continue
            try:
                channel = Channel(key)
            except ValueError:
                errors[f'engine.thresholds.{key}'] = ['unknown channel or metric']
                continue
            if not isinstance(value, dict):
                errors[f'engine.thresholds.{key}'] = ['expected an object']
                continue
            for metric_name, target in value.items():
                try:
                    overrides[(channel, Metric(metric_name))] = float(target)
                except ValueError:
                    errors[f'engine.thresholds.{key}.{metric_name}'] = ['unknown metric or invalid target']

        if errors:
            raise ConfigError('invalid thresholds', errors)

        return Thresholds(
            cvrmse=float(raw.get('cvrmse', defaults.cvrmse)),
            nmbe=float(raw.get('nmbe', defaults.nmbe)),
            overrides=overrides,
        )

    def _space(self) -> ParameterSpace:
        overrides = self.settings.get('parameters') or {}
        errors = {}
        form = Form('parameters', *((name, Input(name, [validators.optional(), validators.range_pair()]))
                                    for name in DEFAULT_SPACE.names))
        try:
            form.validated(overrides)
        except ConfigError as e:
            errors.update(e.errors)

        if errors:
            raise ConfigError('invalid parameter ranges', errors)

        return DEFAULT_SPACE.with_overrides(overrides)

    def path_for(self, *keys: str, default: Optional[str] = None) -> Optional[Path]:
        """A configured path, resolved against the config file directory."""

        value = self.settings.get_path('paths', *keys, default=default)
        if value is None:
            return None

        path = Path(value).expanduser()
        return path if path.is_absolute() else self.home / path

    @property
    def bundle_path(self) -> Path:
        return self.path_for('bundle', default='bundle')

    @property
    def output_path(self) -> Path:
        return self.path_for('output', default='results')

    @property
    def site(self) -> Site:
        values = self.values['site']
        return Site(values.latitude, values.longitude)

    @property
    def log_file(self) -> Optional[str]:
        value = self.settings.get('log_file')
        if value is None:
            return None
        path = Path(value).expanduser()
        return str(path if path.is_absolute() else self.home / path)

    def engine_config(self, **overrides: Any) -> EngineConfig:
        values = self.values['engine']
        settings = dict(
            m=values.m,
            k=values.k,
            thresholds=self.thresholds,
            improvement_tol=values.improvement_tol,
            max_iterations=values.max_iterations,
            batch_size=values.batch_size,
            seed=values.seed,
            jobs=values.jobs,
            max_components=values.max_components,
        )
        settings.update({k: v for k, v in overrides.items() if v is not None})

        try:
            return EngineConfig(**settings)
        except ValueError as e:
            raise ConfigError(f'invalid engine settings: {e}') from e

    @property
    def profile_settings(self) -> Dynamic:
        return self.values['profiles']

    @property
    def max_gap_seconds(self) -> int:
        return self.values['data'].max_gap_seconds

    @property
    def synth_settings(self) -> Dynamic:
        return self.values['synth']

    def _load_init(self) -> None:
        init_file = self._plugin_path / '__init__.py'

        if not init_file.exists():
            init_file.parent.mkdir(parents=True, exist_ok=True)
            init_file.touch()

        loader = importlib.machinery.SourceFileLoader(self._plugin_package, str(init_file))
        spec = importlib.util.spec_from_loader(self._plugin_package, loader, is_package=True)
        module = importlib.util.module_from_spec(spec)
        sys.modules[self._plugin_package] = module
        loader.exec_module(module)

    def load_simulators(self) -> tuple[dict[str, Type[SimulatorBase]], dict[str, Exception]]:
        """Loads every `<home>/plugins/<id>.py` exporting a `Simulator` class."""

        errors = {}
        if not self._plugin_path.is_dir():
            return self.simulators, errors

        if not self._plugins_loaded:
            self._load_init()
            self._plugins_loaded = True

        for script in sorted(self._plugin_path.iterdir()):
            match = self.PLUGIN_FILE_REGEX.match(script.name)
            if not match:
                continue

            simulator_id = match.group('simulator_id')
            if simulator_id in self.simulators or simulator_id == '__init__':
                continue

            try:
                module = importlib.import_module(f'{self._plugin_package}.{simulator_id}')
                Simulator = module.Simulator

                Simulator.id = simulator_id
                self.simulators[Simulator.id] = Simulator

            except Exception as e:
                errors[simulator_id] = e

        return self.simulators, errors

    def simulator(self) -> SimulatorBase:
        simulator_id = self.settings.get('simulator', 'rc')

        if simulator_id not in self.simulators:
            _, errors = self.load_simulators()
            if simulator_id in errors:
                raise ConfigError(f'simulator plugin {simulator_id!r} failed to load: {errors[simulator_id]}')

        Simulator = self.simulators.get(simulator_id)
        if Simulator is None:
            raise ConfigError(f'unknown simulator {simulator_id!r}')

        return Simulator.setup(self.settings.get('building') or {})


def load_config(path: Optional[str | os.PathLike] = None) -> TempocalConfig:
    paths = []
    if path is not None:
        paths.append(Path(path).expanduser())

    env_path = os.environ.get('TEMPOCAL_CONFIG', None)
    if env_path is not None:
        paths.append(Path(env_path).expanduser())

    env_home = os.environ.get('TEMPOCAL_HOME', None)
    if env_home is not None:
        paths.append(Path(env_home).expanduser() / CONFIG_FILENAME)

    xdg_config_home = os.environ.get('XDG_CONFIG_HOME', None)
    if xdg_config_home is not None:
        user_config_path = Path(xdg_config_home)
    else:
        user_config_path = Path('~/.config').expanduser()

    paths.extend([
        user_config_path / 'tempocal' / CONFIG_FILENAME,
        Path('/etc/tempocal') / CONFIG_FILENAME,
    ])

    for candidate in paths:
        try:
            return TempocalConfig(candidate)
        except FileNotFoundError:
            if path is not None and candidate == paths[0]:
                raise ConfigError(f'{candidate}: no such configuration file') from None

    raise ConfigError('no configuration file found')
