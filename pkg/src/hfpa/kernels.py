"""Kernel backend selection: compiled extension if present, numpy otherwise.

Set ``HFPA_KERNEL=python`` to force the fallback (used by the benchmark and
the backend-equivalence tests).
"""
import os

_forced = os.environ.get("HFPA_KERNEL", "").strip().lower()

if _forced == "python":
    from . import _kernels_py as _impl
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as _impl
        BACKEND = "python"

pa_pipeline = _impl.pa_pipeline


def available_backends() -> dict:
    """Import every buildable backend; maps name -> pa_pipeline callable."""
    from . import _kernels_py
    out = {"python": _kernels_py.pa_pipeline}
    try:
        from . import _kernels  # type: ignore[attr-defined]
        out["cython"] = _kernels.pa_pipeline
    except ImportError:
        pass
    return out
