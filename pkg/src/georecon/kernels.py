"""Kernel backend selection.

The compiled extension is used when importable; set
``GEORECON_PURE_PYTHON=1`` to force the numpy fallback. Both backends
produce identical results.
"""
import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("GEORECON_PURE_PYTHON") != "1":
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
else:
    _impl = _pykernels

splat_zbuffer = _impl.splat_zbuffer
uncovered_counts = _impl.uncovered_counts


def backends():
    """Name -> kernel module for every importable backend."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
