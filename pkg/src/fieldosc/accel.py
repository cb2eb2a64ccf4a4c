"""Backend selection for the hot iteration kernels.

The environment variable FIELDOSC_NUMBA controls whether the compiled
kernels are used. Any of "0", "false", "off" (case-insensitive) selects
the plain-Python fallback; everything else (including unset) enables
numba when it imports cleanly. The choice is made once at import time.
"""

import os

_FLAG = os.environ.get("FIELDOSC_NUMBA", "1").strip().lower()

NUMBA_REQUESTED = _FLAG not in ("0", "false", "off")

NUMBA_AVAILABLE = False
if NUMBA_REQUESTED:
    try:
        import numba  # noqa: F401

        NUMBA_AVAILABLE = True
    except Exception:  # pragma: no cover - exercised only on broken installs
        NUMBA_AVAILABLE = False

NUMBA_ENABLED = NUMBA_REQUESTED and NUMBA_AVAILABLE


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "python"
