"""Pick the texel-selection kernel backend at import time.

The compiled Cython module is used when importable; set
``STOCHTEX_BACKEND=python`` to force the numpy fallback.
"""

import os

from . import _purepy

purepy = _purepy

if os.environ.get("STOCHTEX_BACKEND", "").lower() == "python":
    compiled = None
else:
    try:
        from . import _core as compiled
    except ImportError:
        compiled = None

kernels = compiled if compiled is not None else purepy
NAME = kernels.NAME


def get(name: str | None = None):
    """Kernel module by name ("cython" / "python"); default is the active one."""
    if name is None:
        return kernels
    if name == "python":
        return purepy
    if name == "cython":
        if compiled is None:
            raise ImportError("compiled backend not built")
        return compiled
    raise ValueError(f"unknown backend {name!r}")
