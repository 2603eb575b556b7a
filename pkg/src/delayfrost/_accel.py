"""Backend selection for the hot simulation kernels.

Set ``DELAYFROST_BACKEND=numpy`` to force the pure-numpy path, ``numba`` to
require the JIT path. Anything else (or unset) uses numba when importable.
"""
from __future__ import annotations

import os

_REQUESTED = os.environ.get("DELAYFROST_BACKEND", "auto").strip().lower()

try:
    import numba as _numba
except ImportError:  # pragma: no cover - depends on the environment
    _numba = None

HAVE_NUMBA = _numba is not None

if _REQUESTED == "numba" and not HAVE_NUMBA:
    raise ImportError("DELAYFROST_BACKEND=numba but numba is not installed")

DEFAULT_BACKEND = "numba" if (HAVE_NUMBA and _REQUESTED != "numpy") else "numpy"

JIT_OPTIONS = {"nogil": True, "cache": True}


def njit(func):
    """JIT-compile ``func`` when numba is available; otherwise return it unchanged."""
    if HAVE_NUMBA:
        return _numba.njit(**JIT_OPTIONS)(func)
    return func


def resolve_backend(backend: str | None) -> str:
    if backend is None:
        return DEFAULT_BACKEND
    backend = backend.lower()
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}; expected 'numba' or 'numpy'")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    return backend
