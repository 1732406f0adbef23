"""Selects the compiled flow kernel when available, numpy otherwise.

``IMCF_BACKEND=numpy`` forces the fallback; ``IMCF_BACKEND=compiled`` makes a
missing extension a hard error instead of a silent fallback.
"""

from __future__ import annotations

import os

from . import _kernels_np

_FORCED = os.environ.get("IMCF_BACKEND", "").strip().lower()

if _FORCED == "numpy":
    _impl = _kernels_np
else:
    try:
        from . import _kernels as _impl  # compiled extension
    except ImportError:
        if _FORCED == "compiled":
            raise
        _impl = _kernels_np

BACKEND_NAME: str = _impl.BACKEND_NAME


def get_backend(name: str | None = None):
    """Kernel module by name (None = the import-time selection)."""
    if name is None:
        return _impl
    if name == "numpy":
        return _kernels_np
    if name == "compiled":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
