import logging
from pathlib import Path
from string import Template
from typing import Optional, TextIO

__all__ = [
    'configure_logger',
    'resolution_logger',
    'LOG_FORMAT',
]

LOG_FORMAT = '[%(asctime)s] %(name)s | %(levelname)s | %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'


class LoggingParentFilter(logging.Filter):
    def filter(self, record):
        if record.name.startswith('tempocal.'):
            record.name = record.name.split('.', 1)[-1]
        elif record.name == 'py.warnings':
            record.name = 'warnings'

        return True


class ParentHandler(logging.Handler):
    """
    Writes every logger to its own file, named after the logger.
    The template may use `$name` and `$command`
    (e.g.: `logs/$command/$name.log` -> `logs/calibrate/engine.hourly.log`).
    """

    terminator = '\n'

    def __init__(self, template: str, command: str = 'tempocal'):
        super().__init__()

        self.template: str = template
        self.command: str = command
        self._template = Template(template)
        self._open: dict[str, TextIO] = {}

    def path_for(self, name: str) -> Path:
        return Path(self._template.safe_substitute(name=name, command=self.command))

    def close(self):
        self.acquire()
        try:
            for file in self._open.values():
                file.close()
            self._open.clear()

        finally:
            self.release()

        super().close()

    def emit(self, record):
        try:
            msg = self.format(record)
        except Exception:
            self.handleError(record)
            return

        self.acquire()
        try:
            file = self._open.get(record.name)
            if file is None:
                path = self.path_for(record.name)
                path.parent.mkdir(parents=True, exist_ok=True)
                file = self._open[record.name] = open(path, 'a')

            file.write(msg + self.terminator)
            file.flush()

        finally:
            self.release()


logger = None
def configure_logger(
    basename: str,
    filename_format: Optional[str] = None,
    level: int = logging.INFO,
    command: str = 'tempocal'
) -> logging.Logger:
    """
    Sets up console logging once per process. Calling it again only swaps
    the per-name file handler when the file template or command changed.
    """

    global logger

    formatter = logging.Formatter(LOG_FORMAT, DATE_FORMAT)

    if logger is None:
        logger = logging.getLogger(basename)
        logger.setLevel(logging.DEBUG)

        console = logging.StreamHandler()
        console.setFormatter(formatter)
        console.addFilter(LoggingParentFilter())
        logger.addHandler(console)

        # numpy, scipy and sklearn report through the warnings module
        logging.captureWarnings(True)
        warnings_logger = logging.getLogger('py.warnings')
        warnings_logger.addHandler(console)

    for handler in logger.handlers:
        if not isinstance(handler, ParentHandler):
            handler.setLevel(level)

    current = next((h for h in logger.handlers if isinstance(h, ParentHandler)), None)
    if current is not None and (current.template, current.command) != (filename_format, command):
        logger.removeHandler(current)
        current.close()
        current = None

    if current is None and filename_format is not None:
        file = ParentHandler(filename_format, command)
        file.setLevel(logging.DEBUG)
        file.setFormatter(formatter)
        file.addFilter(LoggingParentFilter())
        logger.addHandler(file)

    return logger


def resolution_logger(resolution) -> logging.Logger:
    return logging.getLogger(f'tempocal.engine.{resolution}')
