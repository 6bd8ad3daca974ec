"""Certainty-guided decoding engine."""

from ._cgr_engine import *  # noqa: F401,F403
from ._cgr_engine import __version__  # noqa: F401
