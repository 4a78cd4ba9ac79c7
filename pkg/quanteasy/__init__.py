# -*- coding: utf-8 -*-

"""Top-level package for quanteasy."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .ingest import *  # noqa: F401,F403
from .measures import *  # noqa: F401,F403
from .qr import *  # noqa: F401,F403
from .models import *  # noqa: F401,F403
from .caviar import *  # noqa: F401,F403
from .arfima import *  # noqa: F401,F403
from .evaluation import *  # noqa: F401,F403
from .impvol import *  # noqa: F401,F403
from .pipeline import *  # noqa: F401,F403
from .config import *  # noqa: F401,F403
from . import util  # noqa: F401,F403
