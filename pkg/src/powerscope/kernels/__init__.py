"""Recurrent kernel backend selection.

The compiled extension is preferred when present; the pure-NumPy
fallback is always available.  Set ``POWERSCOPE_KERNELS=python`` (or
``c``) to force a backend; forcing ``c`` raises if the extension is
missing.  Both backends implement the same math; trained models are
statistically equivalent but not bit-identical across backends because
floating-point summation order differs.
"""

import os

from . import pykernels

_requested = os.environ.get("POWERSCOPE_KERNELS", "auto").lower()

if _requested not in ("auto", "c", "python", "py"):
    raise ValueError(f"POWERSCOPE_KERNELS must be auto, c or python, "
                     f"got {_requested!r}")

if _requested in ("auto", "c"):
    try:
        from . import _ckernels as _impl
        BACKEND = "c"
    except ImportError:
        if _requested == "c":
            raise
        _impl = pykernels
        BACKEND = "python"
else:
    _impl = pykernels
    BACKEND = "python"

lstm_forward = _impl.lstm_forward
lstm_backward = _impl.lstm_backward
lstm_infer = _impl.lstm_infer

__all__ = ["BACKEND", "lstm_forward", "lstm_backward", "lstm_infer",
           "pykernels"]
