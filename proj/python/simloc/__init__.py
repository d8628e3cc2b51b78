"""SIM-aided near-field channel estimation and localization."""

from ._simloc import *  # noqa: F401,F403
from ._simloc import __doc__  # noqa: F401

__version__ = "0.1.0"
