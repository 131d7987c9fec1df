from .fredholm import *
from .characteristics import *
from .operators import *
from .problem import *
from .interface import *
from .errors import *
from .utils import *
from .dataclass import *
from .logging_wrapper import LoggingWrapper
from .result_manager import ResultManager

__version__ = "0.3.0"
