"""Backend selection for the contraction kernels.

The compiled extension is used when it was built; otherwise, or when the
environment variable ``DGSA_PURE_PYTHON`` is set to a non-empty value other
than ``0``, the pure-numpy kernels are used. Both expose ``left_env``,
``overlap``, ``sandwich``, ``gram`` and ``sandwich_gram``.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _pykernels


def _select() -> tuple[ModuleType, str]:
    flag = os.environ.get("DGSA_PURE_PYTHON", "")
    if flag and flag != "0":
        return _pykernels, "python"
    try:
        from . import _ckernels  # type: ignore[attr-defined]
    except ImportError:
        return _pykernels, "python"
    return _ckernels, "compiled"


_backend, BACKEND = _select()

left_env = _backend.left_env
overlap = _backend.overlap
sandwich = _backend.sandwich
gram = _backend.gram
sandwich_gram = _backend.sandwich_gram

__all__ = ["BACKEND", "gram", "left_env", "overlap", "sandwich", "sandwich_gram"]
