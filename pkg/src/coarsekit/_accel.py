"""Kernel backend selection.

The compiled ``_core`` extension is used when it imports; otherwise (or when
``COARSEKIT_PURE`` is set to a non-empty value other than ``0``) the numpy
fallback in ``_core_py`` is used.  Both expose the same functions.
"""

import os

from . import _core_py


def _select():
    if os.environ.get("COARSEKIT_PURE", "0") not in ("", "0"):
        return _core_py
    try:
        from . import _core
    except ImportError:
        return _core_py
    return _core


core = _select()
BACKEND = core.BACKEND
