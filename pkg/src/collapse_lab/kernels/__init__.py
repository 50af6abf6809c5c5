"""Block Euler-Maruyama kernel with a compiled and a pure numpy backend.

The compiled extension is used when it imports; setting the environment
variable ``COLLAPSE_LAB_PURE=1`` forces the numpy fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _ckernel
except ImportError:  # extension not built
    _ckernel = None

BACKENDS = {"python": _kernels_py}
if _ckernel is not None:
    BACKENDS["cython"] = _ckernel


def default_backend() -> str:
    if os.environ.get("COLLAPSE_LAB_PURE", "") not in ("", "0") or _ckernel is None:
        return "python"
    return "cython"


def get_backend(name: str | None = None):
    name = default_backend() if name is None else name
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} unavailable; have {sorted(BACKENDS)}") from None


BACKEND = default_backend()
advance = get_backend().advance
hermite_eval = get_backend().hermite_eval
