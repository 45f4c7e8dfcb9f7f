from ._version import *
from .config import TempocalConfig, load_config
from .dynamic import Dynamic
from .engine import CalibrationContext, CalibrationResult, Engine, EngineConfig
from .bundle import Bundle, prepare_bundle
from .session import RunSession
from . import models
