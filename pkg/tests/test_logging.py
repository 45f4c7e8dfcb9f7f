import logging

from tempocal.logging import ParentHandler, configure_logger, resolution_logger
from tempocal.models import Resolution


def file_handlers(logger):
    return [h for h in logger.handlers if isinstance(h, ParentHandler)]


def test_each_resolution_gets_its_own_file(tmp_path):
    template = str(tmp_path / 'logs' / '$command' / '$name.log')
    logger = configure_logger('tempocal', template, logging.INFO, 'calibrate')
    try:
        resolution_logger(Resolution.hourly).info('iteration 0')
        resolution_logger(Resolution.daily).warning('widening the mixture')

        hourly = (tmp_path / 'logs' / 'calibrate' / 'engine.hourly.log').read_text()
        daily = (tmp_path / 'logs' / 'calibrate' / 'engine.daily.log').read_text()
        assert 'engine.hourly | INFO | iteration 0' in hourly
        assert 'WARNING | widening the mixture' in daily
        assert 'iteration 0' not in daily

    finally:
        configure_logger('tempocal', None)

    assert file_handlers(logger) == []


def test_reconfiguring_swaps_the_file_handler(tmp_path):
    first = configure_logger('tempocal', str(tmp_path / 'a' / '$name.log'))
    second = configure_logger('tempocal', str(tmp_path / 'b' / '$name.log'))
    try:
        assert first is second
        assert len(file_handlers(second)) == 1

        logging.getLogger('tempocal.bundle').info('prepared')
        assert (tmp_path / 'b' / 'bundle.log').exists()
        assert not (tmp_path / 'a' / 'bundle.log').exists()

    finally:
        configure_logger('tempocal', None)
