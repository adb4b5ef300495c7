"""

"""


from .version import version as __version__

from .core import *

"""
submodules are imported only if needed
so there is no heavy dependencies:

import dynpet.forward as fw
import dynpet.listmode as lm
import dynpet.solvers as ds
import dynpet.widgets as dw

or alternatively you can do
import dynpet.full as dp

"""
