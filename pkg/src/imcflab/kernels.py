"""Kernel selection: compiled extension when importable, NumPy otherwise.

Set ``IMCFLAB_PURE_PYTHON=1`` to force the NumPy path.
"""

import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("IMCFLAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        _impl = _compiled


def imcf_speed(r, p, R, n):
    """Flat-array pointwise speed v/H and H - (n-1); see ``_kernels_py``."""
    r = np.ascontiguousarray(r, dtype=float).reshape(-1)
    d = p.shape[-1]
    p = np.ascontiguousarray(p, dtype=float).reshape(-1, d)
    R = np.ascontiguousarray(R, dtype=float).reshape(-1, d, d)
    return _impl.imcf_speed(r, p, R, int(n))
