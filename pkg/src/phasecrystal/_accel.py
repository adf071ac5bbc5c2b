"""Backend selection for the hot kernels.

Every kernel in the package exists twice: a loop version compiled with
numba's ``njit`` and a vectorised numpy version. Setting the environment
variable ``PHASECRYSTAL_NUMBA=0`` (or running without numba installed)
selects the numpy path everywhere. The choice is made once at import time.
"""

from __future__ import annotations

import os
import warnings

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    numba = None
    _HAVE_NUMBA = False

_FLAG = os.environ.get("PHASECRYSTAL_NUMBA", "1").strip().lower()
USE_NUMBA = _HAVE_NUMBA and _FLAG not in ("0", "false", "no", "off")


def njit(fn):
    """Compile ``fn`` with numba when available, else return it unchanged."""
    if not _HAVE_NUMBA:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def pick(nb_impl, np_impl):
    """Return the kernel implementation for the active backend."""
    return nb_impl if USE_NUMBA else np_impl


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"


def set_threads(n: int | None) -> None:
    """Cap numba's worker pool; a no-op on the numpy backend."""
    if n is None or not _HAVE_NUMBA:
        return
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    # Starting the pool may probe an outdated TBB and warn before falling
    # back to another threading layer; the fallback is fine.
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*TBB.*")
        numba.set_num_threads(n)
