"""Dispatch layer: picks the compiled or fallback kernels once at import."""

from . import accel

if accel.NUMBA_ENABLED:
    from .kernels_numba import (  # noqa: F401
        BLOWUP,
        iterate_delayed,
        iterate_pair,
        iterate_solo,
        iterate_swarm,
    )
else:
    from .kernels_numpy import (  # noqa: F401
        BLOWUP,
        iterate_delayed,
        iterate_pair,
        iterate_solo,
        iterate_swarm,
    )

BACKEND = accel.backend_name()
