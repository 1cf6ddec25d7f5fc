"""Finite-width dropout training dynamics and their large-width limits."""

from ._dplab import *  # noqa: F401,F403
from ._dplab import __doc__  # noqa: F401

__version__ = "0.1.0"
