"""Thread-count control for the parallel kernels.

The kernels are deterministic for any thread count; these helpers only bound
how many worker threads numba may use. Requests are clamped to the range the
runtime supports, so asking for more threads than the machine has is safe.
"""

from __future__ import annotations

import os

import numba

ENV_VAR = "RBOXKIT_THREADS"


def max_thread_count() -> int:
    return int(numba.config.NUMBA_NUM_THREADS)


def get_thread_count() -> int:
    return int(numba.get_num_threads())


def set_thread_count(n: int) -> int:
    """Set the worker thread count, clamped to [1, max]; returns the value used."""
    eff = max(1, min(int(n), max_thread_count()))
    numba.set_num_threads(eff)
    return eff


def apply_env_default() -> int:
    """Apply the RBOXKIT_THREADS environment default, if set."""
    raw = os.environ.get(ENV_VAR)
    if raw:
        try:
            return set_thread_count(int(raw))
        except ValueError:
            pass
    return get_thread_count()
