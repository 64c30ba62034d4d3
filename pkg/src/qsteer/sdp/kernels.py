"""Kernel selection: compiled Schur assembly when built, numpy otherwise.

Set ``QSTEER_PURE_PYTHON=1`` to force the numpy fallback.
"""
from __future__ import annotations

import os

from ._schur_ref import schur_group_ref

HAVE_KERNEL = False
schur_group = None

if not os.environ.get("QSTEER_PURE_PYTHON"):
    try:
        from ._schur import schur_group  # type: ignore[no-redef]

        HAVE_KERNEL = True
    except ImportError:  # extension not built
        schur_group = None

BACKEND = "cython" if HAVE_KERNEL else "numpy"

__all__ = ["HAVE_KERNEL", "BACKEND", "schur_group", "schur_group_ref"]
