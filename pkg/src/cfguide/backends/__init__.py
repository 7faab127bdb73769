"""Backend selection for the attention hot path.

The causal biased-attention kernel is the only operation that dominates decode
runtime, so it exists twice: a vectorized numpy fallback and a compiled Cython
version. Selection happens once at import; set CFGUIDE_BACKEND=python|cython
to force a choice (``cython`` raises if the extension was not built).
"""

import os

from cfguide.backends import numpy_ops

_requested = os.environ.get("CFGUIDE_BACKEND", "auto")

if _requested == "python":
    _impl = numpy_ops
elif _requested == "cython":
    from cfguide.backends import _fastops as _impl  # type: ignore[no-redef]
else:
    try:
        from cfguide.backends import _fastops as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = numpy_ops

BACKEND_NAME = "cython" if _impl is not numpy_ops else "python"

causal_attention = _impl.causal_attention


def available_backends():
    names = ["python"]
    try:
        from cfguide.backends import _fastops  # noqa: F401

        names.append("cython")
    except ImportError:
        pass
    return names
