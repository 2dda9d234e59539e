"""Selects the simulation kernel backend at import time.

The compiled extension is preferred; set ``LOCALLQR_PURE_PYTHON=1`` to force
the NumPy fallback.
"""

import os

from . import _simkernel_py

_compiled = None
if os.environ.get("LOCALLQR_PURE_PYTHON") != "1":
    try:
        from . import _simkernel as _compiled
    except ImportError:
        _compiled = None

_active = _compiled if _compiled is not None else _simkernel_py
BACKEND = _active.BACKEND


def available_backends() -> list[str]:
    return ["cython", "python"] if _compiled is not None else ["python"]


def get_backend(name: str | None = None):
    """Kernel module by name ("cython" or "python"); default is the active one."""
    if name is None:
        return _active
    if name == "python":
        return _simkernel_py
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernel is not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")
