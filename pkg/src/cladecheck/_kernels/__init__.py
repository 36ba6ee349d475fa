"""Kernel backend selection.

The compiled extension is preferred when it imported cleanly; the numpy
fallback is used otherwise.  Set CLADECHECK_KERNEL=python or =cython to force
a backend (forcing cython raises if the extension is unavailable).
"""

from __future__ import annotations

import importlib
import os

from . import pykernels

_requested = os.environ.get("CLADECHECK_KERNEL", "").strip().lower()
if _requested not in ("", "python", "cython"):
    raise ValueError(f"CLADECHECK_KERNEL must be 'python' or 'cython', got {_requested!r}")

_core = None
if _requested != "python":
    try:
        _core = importlib.import_module("._core", __name__)
    except ImportError:
        _core = None
if _requested == "cython" and _core is None:
    raise ImportError("compiled kernels requested via CLADECHECK_KERNEL but not built")

active = _core if _core is not None else pykernels
BACKEND = active.BACKEND_NAME

__all__ = ["active", "pykernels", "BACKEND", "available_backends"]


def available_backends() -> dict[str, object]:
    """Importable kernel modules keyed by backend name."""
    out: dict[str, object] = {"python": pykernels}
    if _core is not None:
        out["cython"] = _core
    return out
