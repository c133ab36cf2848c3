"""Compressed-domain image classification toolkit."""

from ._cslnet import *  # noqa: F401,F403
from ._cslnet import __version__  # noqa: F401
