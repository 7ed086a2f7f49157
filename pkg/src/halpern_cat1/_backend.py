"""Kernel selection: the compiled extension when importable, else pure Python.

Set ``HALPERN_CAT1_PURE=1`` to force the fallback (used by the benchmark and
the cross-backend tests).
"""
import os

from halpern_cat1 import _pykernels

IDENTITY = 0
CAP = 1
CONTRACTION = 2
NEGATION = 3
CLAMP = 4

SPHERE_CODE = 0
SEGMENT_CODE = 1

kernels = _pykernels
if not os.environ.get("HALPERN_CAT1_PURE"):
    try:
        from halpern_cat1 import _kernels as kernels  # noqa: F811
    except ImportError:
        pass

BACKEND = kernels.BACKEND
python_kernels = _pykernels


def compiled_kernels():
    """Return the compiled module or None (independent of the env override)."""
    try:
        from halpern_cat1 import _kernels
    except ImportError:
        return None
    return _kernels
