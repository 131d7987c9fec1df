from .callback import *
from .nonresonance import *
from .solver import *
from .scenarios import *
from .manufactured import *
