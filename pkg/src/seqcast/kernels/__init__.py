"""Backend selection for the LSTM sequence kernel.

The compiled Cython extension is preferred when it was built; otherwise the
numpy fallback is used.  Set ``SEQCAST_PURE_PY=1`` to force the fallback
(useful for the backend-parity tests and the kernel benchmark).
"""

import os

from . import pylstm

if os.environ.get("SEQCAST_PURE_PY") == "1":
    _impl = pylstm
else:
    try:
        from . import _lstm_c as _impl
    except ImportError:
        _impl = pylstm

BACKEND = _impl.BACKEND
lstm_layer_forward = _impl.lstm_layer_forward
lstm_layer_backward = _impl.lstm_layer_backward
adam_update = _impl.adam_update


def available_backends():
    """Importable kernel modules keyed by name (for benchmarks/tests)."""
    out = {"python": pylstm}
    try:
        from . import _lstm_c
        out["compiled"] = _lstm_c
    except ImportError:
        pass
    return out
