"""Backend selection for the numerical kernels.

The compiled extension is preferred. Set ``ANDERSON_LEVELS_BACKEND=python``
to force the NumPy fallback (useful for benchmarking and for platforms
without a C compiler).
"""

import os

from . import _pycore

_requested = os.environ.get("ANDERSON_LEVELS_BACKEND", "auto").lower()

if _requested == "python":
    _impl = _pycore
else:
    try:
        from . import _core as _impl
    except ImportError:
        if _requested == "cython":
            raise
        _impl = _pycore

BACKEND = "cython" if _impl is not _pycore else "python"

tridiagonalize = _impl.tridiagonalize
tql = _impl.tql
sturm_count = _impl.sturm_count
cyclic_count = _impl.cyclic_count
cyclic_bisect = _impl.cyclic_bisect


def backends():
    """Return the importable kernel modules keyed by name."""
    found = {"python": _pycore}
    try:
        from . import _core
    except ImportError:
        pass
    else:
        found["cython"] = _core
    return found
