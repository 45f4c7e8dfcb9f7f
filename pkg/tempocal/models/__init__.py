from .common import *
from .series import *
from .weather import *
from .parameters import *
