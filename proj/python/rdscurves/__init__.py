"""Cylinder random dynamical systems toolkit.

Thin wrapper over the compiled core: cocycle simulation, Lyapunov spectra,
pullback attractors, and random periodic curve extraction.
"""

from rdscurves._core import *  # noqa: F401,F403
from rdscurves._core import __doc__ as _core_doc

__all__ = [name for name in dir() if not name.startswith("_")]
__doc__ = _core_doc
