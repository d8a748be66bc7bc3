"""Numba acceleration gate.

Hot kernels in this package exist in two flavors: a numba ``@njit`` loop
version and a vectorized pure-numpy version.  The active default is chosen
once at import time:

* numba is used when it is importable and the environment variable
  ``MPNN_MIMO_DISABLE_NUMBA`` is unset (or set to 0/false/off);
* otherwise every kernel dispatches to its numpy implementation.

``benchmarks/bench_kernels.py`` times both paths against each other.
"""

import os


def _numba_requested() -> bool:
    flag = os.environ.get("MPNN_MIMO_DISABLE_NUMBA", "").strip().lower()
    return flag in ("", "0", "false", "off", "no")


NUMBA_ENABLED = False
if _numba_requested():
    try:
        from numba import njit  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:
        NUMBA_ENABLED = False

if not NUMBA_ENABLED:

    def njit(*args, **kwargs):  # type: ignore[misc]
        """No-op replacement so kernel modules always import cleanly."""

        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap
