from .modules import *
from .engine import *
