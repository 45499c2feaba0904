"""Kernel backend selection.

The compiled extension is preferred when importable; the numpy lane is the
fallback. FPBILSTM_BACKEND=numpy|cython|auto overrides the choice (set it
before first import). Both lanes share one contract and are covered by the
same parity tests.
"""

import os

from . import numpy_backend

_requested = os.environ.get("FPBILSTM_BACKEND", "auto").lower()
if _requested not in ("auto", "cython", "numpy"):
    raise ValueError(
        f"FPBILSTM_BACKEND must be auto, cython, or numpy; got {_requested!r}"
    )

_impl = None
if _requested in ("auto", "cython"):
    try:
        from . import _ckernels as _impl
    except ImportError:
        if _requested == "cython":
            raise
        _impl = None
if _impl is None:
    _impl = numpy_backend

BACKEND = _impl.NAME

im2col = _impl.im2col
col2im = _impl.col2im
maxpool_forward = _impl.maxpool_forward
maxpool_backward = _impl.maxpool_backward
lstm_forward = _impl.lstm_forward
lstm_backward = _impl.lstm_backward


def available_backends() -> dict:
    """Importable backend modules by name (for parity tests and benchmarks)."""
    out = {"numpy": numpy_backend}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
