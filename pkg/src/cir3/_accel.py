"""Backend selection for the hot kernels.

``CIR3_BACKEND=numpy`` forces the vectorised numpy fallback; anything else
(default ``numba``) uses the JIT kernels when numba is importable.
"""
from __future__ import annotations

import os
import warnings

try:
    import numba

    # TBB in this environment is often too old; workqueue is always available
    if "NUMBA_THREADING_LAYER" not in os.environ:
        numba.config.THREADING_LAYER = "workqueue"
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None

_requested = os.environ.get("CIR3_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    warnings.warn(f"unknown CIR3_BACKEND={_requested!r}; using numba", stacklevel=1)
    _requested = "numba"

USE_NUMBA = _requested == "numba" and numba is not None
BACKEND = "numba" if USE_NUMBA else "numpy"


def set_threads(n: int | None) -> int:
    """Set the worker count for path-parallel kernels; returns the count in effect.

    Results never depend on this value: every path owns its noise streams.
    """
    if not USE_NUMBA or n is None:
        return 1 if not USE_NUMBA else numba.get_num_threads()
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n
