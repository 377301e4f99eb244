"""Optional numba acceleration.

Set ``MEDTRI_DISABLE_NUMBA=1`` to force the pure-numpy kernels even when numba
is installed. The flag is read once at import time.
"""

from __future__ import annotations

import os

try:
    from numba import njit

    NUMBA_INSTALLED = True
except ImportError:  # pragma: no cover - exercised only without numba
    NUMBA_INSTALLED = False

DISABLED_BY_ENV = os.environ.get("MEDTRI_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}
USE_NUMBA = NUMBA_INSTALLED and not DISABLED_BY_ENV


def optional_njit(*args, **kwargs):
    """``numba.njit`` when numba is installed, identity otherwise.

    The compiled function is used only when :data:`USE_NUMBA` is true, but it
    is compiled whenever numba exists so tests can compare both paths.
    """

    def decorator(func):
        if NUMBA_INSTALLED:
            return njit(*args, **kwargs)(func)
        return func

    return decorator
