"""Kernel backend selection.

The compiled extension is preferred when importable; otherwise the
pure-NumPy fallback is used. ``QFIM_CBC_BACKEND`` overrides the choice:
``auto`` (default), ``compiled``, or ``python``.
"""
from __future__ import annotations

import os

_choice = os.environ.get("QFIM_CBC_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "compiled", "python"):
    raise ValueError(
        f"QFIM_CBC_BACKEND must be 'auto', 'compiled', or 'python', got {_choice!r}"
    )

if _choice == "python":
    from . import _kernels_py as kernels
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        if _choice == "compiled":
            raise ImportError(
                "QFIM_CBC_BACKEND=compiled but the extension is not built; "
                "run 'pip install -e . --no-build-isolation' or 'python setup.py build_ext --inplace'"
            ) from None
        from . import _kernels_py as kernels  # type: ignore[no-redef]


def backend_name() -> str:
    """Name of the active kernel backend: 'compiled' or 'python'."""
    return kernels.BACKEND_NAME
