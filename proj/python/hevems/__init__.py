"""Series-parallel HEV energy management toolkit.

Physics, PPO training, source-to-target transfer studies, and a
dynamic-programming benchmark, implemented in C++ and exposed through the
``hevems._core`` extension.
"""

from hevems._core import *  # noqa: F401,F403
from hevems._core import __doc__ as _core_doc  # noqa: F401

__version__ = "0.1.0"
