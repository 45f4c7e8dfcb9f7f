from .forms import *
from .fields import *
from . import validators
