"""
This is a module to import the entire dynpet in a flat way.
With `import dynpet.full as dp`
Note that import is convenient but quite heavy.

# this import the core only
import dynpet as dp

# this import module one by one
import dynpet.forward as fw
import dynpet.listmode as lm
import dynpet.objective as do
import dynpet.solvers as ds
import dynpet.debias as db
import dynpet.scaling as sc
import dynpet.widgets as dw
import dynpet.cli as cli


# this import everything in a flat module
import dynpet.full as dp
"""

from .core import *
from .forward import *
from .listmode import *
from .objective import *
from .solvers import *
from .debias import *
from .scaling import *
from .widgets import *
from .cli import *
