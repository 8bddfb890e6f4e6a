"""JIT toggle shared by all hot kernels.

Set ``UQLED_NUMBA=0`` (or ``false``/``off``) to force the pure-numpy
fallback kernels; the default uses numba when it is importable.
"""

import os

__all__ = ["JIT_ENABLED", "njit"]


def _env_enabled() -> bool:
    return os.environ.get("UQLED_NUMBA", "1").strip().lower() not in ("0", "false", "off")


JIT_ENABLED = _env_enabled()

if JIT_ENABLED:
    try:
        from numba import njit
    except ImportError:
        JIT_ENABLED = False

if not JIT_ENABLED:

    def njit(func=None, **kwargs):
        """No-op stand-in so modules can decorate unconditionally."""
        if func is not None:
            return func

        def wrapper(f):
            return f

        return wrapper
