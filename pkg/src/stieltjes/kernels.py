"""Backend selection for the smooth-segment integrator.

The compiled ``_kernels`` extension is used when it imports; otherwise the
pure-Python ``_pykernels`` takes over. Callers can still ask for a specific
backend through :func:`get`.
"""

from __future__ import annotations

import logging

from . import _pykernels as python_backend

logger = logging.getLogger(__name__)

try:
    from . import _kernels as native_backend
except ImportError:  # extension not built
    native_backend = None

if native_backend is not None:
    active = native_backend
    BACKEND = "native"
else:
    active = python_backend
    BACKEND = "python"

OK = python_backend.OK
BLOWUP = python_backend.BLOWUP
EXIT = python_backend.EXIT

rk4_callable = python_backend.rk4_callable


def get(name: str = "auto"):
    """Return the backend module for ``name`` in {"auto", "native", "python"}."""
    if name == "auto":
        return active
    if name == "python":
        return python_backend
    if name == "native":
        if native_backend is None:
            raise ImportError("the compiled kernel extension is not available")
        return native_backend
    raise ValueError(f"unknown backend {name!r}")


def name_of(module) -> str:
    return "native" if module is native_backend and module is not None else "python"
