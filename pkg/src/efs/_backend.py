"""Pick the kernel implementation at import time.

The compiled module is used when it imports; ``EFS_BACKEND=python`` forces
the NumPy fallback (handy for equivalence tests and debugging).
"""
import os

from efs import _pykernels

BACKEND = "python"
kernels = _pykernels

if os.environ.get("EFS_BACKEND", "").lower() != "python":
    try:
        from efs import _ckernels
    except ImportError:  # pragma: no cover - depends on the build
        pass
    else:
        kernels = _ckernels
        BACKEND = "cython"


def get_kernels(name=None):
    """Return a kernel module by name (``"cython"``/``"python"``) or the active one."""
    if name is None:
        return kernels
    if name == "python":
        return _pykernels
    if name == "cython":
        from efs import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
