"""Hot kernels with a compiled backend and a NumPy fallback.

The compiled extension is used when it was built and ``EMWF_PURE_PYTHON`` is
not set; otherwise the NumPy implementation is selected at import.
"""
import os

from . import _pykernels

try:
    if os.environ.get("EMWF_PURE_PYTHON"):
        raise ImportError("pure-Python backend requested")
    from . import _ckernels as _active
    BACKEND = "cython"
except ImportError:
    _active = _pykernels
    BACKEND = "python"

BACKENDS = {"python": _pykernels}
if BACKEND == "cython":
    BACKENDS["cython"] = _active


def get_backend(name=None):
    """Kernel module by name (``"python"``/``"cython"``), or the active one."""
    if name is None:
        return _active
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available; have {sorted(BACKENDS)}") from None


def interp_periodic(values, origin, spacing, points, order=6):
    return _active.interp_periodic(values, origin, spacing, points, order)
