"""Hot-kernel dispatch: compiled extension when built, numpy otherwise.

Set ``WQED_TRANSPORT_PURE_PYTHON=1`` to force the numpy implementation.
"""

from __future__ import annotations

import os

from . import _pykernels

if os.environ.get("WQED_TRANSPORT_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

steady_transport_batch = _impl.steady_transport_batch
infidelity_uniform = _impl.infidelity_uniform

__all__ = ["BACKEND", "steady_transport_batch", "infidelity_uniform"]
