"""Select the compiled kernels when available, else the numpy fallback.

Set ``TREESCAN_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _fallback

if os.environ.get("TREESCAN_PURE_PYTHON", "") not in ("", "0"):
    kernels = _fallback
else:
    try:
        from . import _kernels as kernels
    except ImportError:  # extension not built
        kernels = _fallback

BACKEND = "python" if kernels is _fallback else "compiled"


def available_backends():
    """Map backend name -> kernel module for every importable backend."""
    out = {"python": _fallback}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        out["compiled"] = _kernels
    return out


def threads():
    """Worker count from ``TREESCAN_THREADS`` (0 or unset = one per CPU)."""
    try:
        n = int(os.environ.get("TREESCAN_THREADS", "0"))
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return n
