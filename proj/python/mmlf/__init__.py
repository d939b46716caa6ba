"""Evidential late fusion of 2D and 3D object detections.

The heavy lifting lives in the compiled extension; this package simply
re-exports it.
"""

from ._mmlf import *  # noqa: F401,F403
from ._mmlf import __version__  # noqa: F401
