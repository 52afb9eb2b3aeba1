"""Offline reinforcement learning for job shop scheduling (C++ core)."""

from ._cdqac import *  # noqa: F401,F403
from ._cdqac import __doc__  # noqa: F401

__version__ = "0.1.0"
