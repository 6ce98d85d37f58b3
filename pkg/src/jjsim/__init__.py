"""Simulation and analysis toolkit for the density-matrix Josephson-junction model."""
from .analysis import *  # noqa: F401,F403
from .characteristic import *  # noqa: F401,F403
from .integrate import *  # noqa: F401,F403
from .model import *  # noqa: F401,F403
from .model import CODATA  # noqa: F401
from .radiation import *  # noqa: F401,F403
from .stability import *  # noqa: F401,F403

__version__ = "0.1.0"
