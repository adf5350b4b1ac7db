"""Simulation kernels with a compiled core and a numpy fallback.

The compiled extension is used when it imports; set
``NOISY_EXTREMES_BACKEND=python`` to force the fallback.
"""

import os

from . import _fallback

_requested = os.environ.get("NOISY_EXTREMES_BACKEND", "auto").lower()

if _requested == "python":
    kernels = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise
        kernels = _fallback
        BACKEND = "python"


def get_kernels(backend=None):
    """Return the kernel module for ``backend`` ("compiled", "python") or the default."""
    if backend is None:
        return kernels
    if backend == "python":
        return _fallback
    if backend == "compiled":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {backend!r}")


__all__ = ["BACKEND", "kernels", "get_kernels"]
