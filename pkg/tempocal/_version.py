__all__ = ['__version__', '__desc__', '__fulltitle__']

__version__ = '0.4.0'
__fulltitle__ = 'tempocal'
__desc__ = 'Subset-simulation calibration of building energy models across temporal resolutions.'
