"""Kernel backend selection.

Prefers the compiled extension; falls back to the pure-Python reference
implementation when the extension is unavailable or when the environment
variable ``MFGSOLVE_PURE_PYTHON`` is set (useful for benchmarking and
debugging).
"""

from __future__ import annotations

import os

if os.environ.get("MFGSOLVE_PURE_PYTHON"):
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels_c as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        from . import _kernels_py as _impl  # type: ignore[no-redef]

        BACKEND = "python"

sarsa_scan = _impl.sarsa_scan
pg_ascent = _impl.pg_ascent
