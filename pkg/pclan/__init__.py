from . import configuratron
from . import experiments
from . import utils
