from typing import Any, Optional

__all__ = [
    'TempocalError',
    'ConfigError',
    'DataError',
    'ResolutionError',
    'AlignmentError',
    'WeatherError',
    'NotCalibratableError',
    'ScheduleError',
    'ClusteringError',
    'SamplerError',
    'TruncationError',
    'SimulationError',
    'BatchError',
]


class TempocalError(Exception):
    pass


class ConfigError(TempocalError):
    def __init__(self, message: str, errors: Optional[dict[str, list[str]]] = None):
        super().__init__(message)
        self.errors: dict[str, list[str]] = errors or {}

    def __str__(self):
        message = super().__str__()
        if not self.errors:
            return message

        details = '; '.join(f'{key}: {", ".join(errs)}' for key, errs in self.errors.items())
        return f'{message} ({details})'


class DataError(TempocalError, ValueError):
    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        if path is not None and line is not None:
            message = f'{path}:{line}: {message}'
        elif path is not None:
            message = f'{path}: {message}'

        super().__init__(message)
        self.path = path
        self.line = line


class ResolutionError(DataError):
    pass


class AlignmentError(DataError):
    pass


class WeatherError(DataError):
    pass


class NotCalibratableError(DataError):
    pass


class ScheduleError(TempocalError):
    pass


class ClusteringError(TempocalError, ValueError):
    pass


class SamplerError(TempocalError):
    pass


class TruncationError(SamplerError):
    pass


class SimulationError(TempocalError):
    def __init__(self, message: str, vector: Optional[Any] = None):
        super().__init__(message)
        self.vector = vector


class BatchError(TempocalError):
    def __init__(self, message: str, errors: Optional[dict[int, str]] = None):
        super().__init__(message)
        self.errors: dict[int, str] = errors or {}
