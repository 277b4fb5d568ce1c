"""Kernel selection: compiled extension when available, numpy fallback otherwise.

Set ``QDSIM_BACKEND=pure`` or ``QDSIM_BACKEND=compiled`` to force a choice
(the latter raises if the extension was not built).
"""

from __future__ import annotations

import os

from . import _scf_py

_requested = os.environ.get("QDSIM_BACKEND", "auto").lower()

if _requested not in {"auto", "pure", "compiled"}:
    raise ValueError(f"QDSIM_BACKEND must be auto, pure, or compiled, not {_requested!r}")

if _requested == "pure":
    scf_fixed_point = _scf_py.scf_fixed_point
    BACKEND = "pure"
else:
    try:
        from . import _scf  # type: ignore[attr-defined]

        scf_fixed_point = _scf.scf_fixed_point
        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise ImportError(
                "QDSIM_BACKEND=compiled but the qdsim._scf extension is not built; "
                "reinstall with a C compiler available")
        scf_fixed_point = _scf_py.scf_fixed_point
        BACKEND = "pure"
