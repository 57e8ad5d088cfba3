"""Kernel backend selection.

The compiled extension is used when importable; set ``ANALOGPIM_BACKEND``
to ``python`` or ``compiled`` to force one.  Both expose the same
functions with identical semantics (noise is always drawn by callers).
"""

from __future__ import annotations

import os

from . import pyref

_requested = os.environ.get("ANALOGPIM_BACKEND", "auto").lower()

if _requested not in ("auto", "python", "compiled"):
    raise RuntimeError(f"ANALOGPIM_BACKEND={_requested!r} not one of auto/python/compiled")

if _requested == "python":
    _impl = pyref
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _requested == "compiled":
            raise RuntimeError("compiled kernel backend requested but not built")
        _impl = pyref

BACKEND_NAME = _impl.BACKEND_NAME
vtc_eval = _impl.vtc_eval
sa_forward = _impl.sa_forward
run_recurrence = _impl.run_recurrence


def get_backend(name: str = "auto"):
    """Return the kernel module for ``name`` (used by the benchmark)."""
    if name in ("auto", BACKEND_NAME):
        return _impl
    if name == "python":
        return pyref
    from . import _core  # type: ignore[attr-defined]
    return _core
