"""Select the kernel implementation at import time.

``RBMLAB_BACKEND=python`` forces the numpy fallback; otherwise the compiled
module is used when it was built. ``RBMLAB_THREADS`` caps OpenMP threads.
"""
import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

AVAILABLE = (["cython"] if _compiled is not None else []) + ["python"]


def get_kernels(name: str | None = None):
    """Kernel module by name ("cython" or "python"); default per environment."""
    if name is None:
        name = os.environ.get("RBMLAB_BACKEND") or AVAILABLE[0]
    if name == "python":
        return _kernels_py
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def n_threads() -> int:
    raw = os.environ.get("RBMLAB_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


kernels = get_kernels()
BACKEND = kernels.BACKEND
