"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the pure-Python
kernels are used. Set ``TREEKP_BACKEND=python`` to force the fallback.
"""

from __future__ import annotations

import os

from treekp import _pykernels

BACKEND = "python"
kernels = _pykernels

if os.environ.get("TREEKP_BACKEND", "").lower() != "python":
    try:
        from treekp import _ckernels
    except ImportError:  # extension not built
        pass
    else:
        kernels = _ckernels
        BACKEND = "cython"


def get_kernels(name: str | None = None):
    """Return the kernel module for ``name`` ("cython", "python") or the active one."""
    if name is None:
        return kernels
    if name == "python":
        return _pykernels
    if name == "cython":
        from treekp import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
