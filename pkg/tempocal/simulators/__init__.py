from .base import *
from .rc import *

BUILTIN_SIMULATORS = {
    RCSimulator.id: RCSimulator,
}
