"""Representation geometry toolkit (Python bindings to the C++ core)."""

from ._repgeo import *  # noqa: F401,F403
from ._repgeo import RepgeoError

__all__ = [name for name in dir() if not name.startswith("_")]
