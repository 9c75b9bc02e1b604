"""Stencil-kernel backend selection.

The compiled extension is preferred when importable; the NumPy implementation
is the fallback.  Set YLAB_BACKEND=python or YLAB_BACKEND=cython to force a
choice (forcing cython raises if the extension is missing).
"""

from __future__ import annotations

import os

_choice = os.environ.get("YLAB_BACKEND", "auto").strip().lower()

if _choice in ("auto", "", "cython"):
    try:
        from . import _kernels_cy as _impl
    except ImportError:
        if _choice == "cython":
            raise
        from . import _kernels_py as _impl
elif _choice == "python":
    from . import _kernels_py as _impl
else:
    raise ValueError(f"unknown YLAB_BACKEND={_choice!r}")

BACKEND = _impl.BACKEND
lap_grad = _impl.lap_grad
hessian = _impl.hessian
mg_sweep = _impl.mg_sweep
mg_residual = _impl.mg_residual
mg_restrict = _impl.mg_restrict
mg_prolong_add = _impl.mg_prolong_add

# center weights are assembled once per table; numpy is fine for both backends
from ._kernels_py import stencil_diag  # noqa: E402
