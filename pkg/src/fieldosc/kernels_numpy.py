"""Reference iteration kernels in plain Python over numpy arrays.

These are the fallback implementations selected when numba is disabled
or unavailable. The arithmetic is written scalar-by-scalar in the same
order as the compiled kernels so both backends produce bit-identical
trajectories.

Divergence convention: when |x| exceeds BLOWUP the remaining slots of
the output are filled with +inf and iteration stops. Callers test
np.isfinite to detect escape.
"""

import numpy as np

BLOWUP = 1.0e6


def iterate_solo(x0, alpha, n_total, n_keep):
    """Iterate the transformed map, returning the last n_keep states.

    Step 0 is x0 itself; the returned tail covers steps
    n_total - n_keep .. n_total - 1.
    """
    out = np.empty(n_keep, dtype=np.float64)
    x = x0
    first = n_total - n_keep
    for n in range(n_total):
        if n >= first:
            out[n - first] = x
        if not (-BLOWUP < x < BLOWUP):
            out[max(n - first, 0):] = np.inf
            return out
        x = x * (2.0 - alpha * x - alpha)
    return out


def iterate_pair(x0, y0, alpha, k2, n_total, n_keep):
    """Iterate two mutually coupled maps; returns tail of shape (n_keep, 2)."""
    out = np.empty((n_keep, 2), dtype=np.float64)
    x = x0
    y = y0
    first = n_total - n_keep
    for n in range(n_total):
        if n >= first:
            out[n - first, 0] = x
            out[n - first, 1] = y
        if not (-BLOWUP < x < BLOWUP and -BLOWUP < y < BLOWUP):
            out[max(n - first, 0):, :] = np.inf
            return out
        xn = x * (2.0 - alpha * x - alpha) + k2 * y
        yn = y * (2.0 - alpha * y - alpha) + k2 * x
        x = xn
        y = yn
    return out


def iterate_delayed(x0, alpha, k3, k4, n_total, n_keep):
    """Iterate the two-step-memory map with x_{-1} = x_{-2} = x0."""
    out = np.empty(n_keep, dtype=np.float64)
    x = x0
    x1 = x0
    x2 = x0
    first = n_total - n_keep
    for n in range(n_total):
        if n >= first:
            out[n - first] = x
        if not (-BLOWUP < x < BLOWUP):
            out[max(n - first, 0):] = np.inf
            return out
        xn = x * (2.0 - alpha * x - alpha) + k3 * x1 + k4 * x2
        x2 = x1
        x1 = x
        x = xn
    return out


def iterate_swarm(x0, g, alpha, n_steps, fb_gain, gamma, fb_start, gtilde):
    """Shared-field ensemble iteration with optional delayed feedback.

    Every device receives the common field sum(g[j] * x[j]) built from
    the pre-update states (self term included via g's own entry). When
    fb_gain is nonzero a delayed term fb_gain * Ttil[n - gamma] is added
    uniformly once n >= fb_start, where Ttil is the gtilde-weighted sum
    recorded at every step. Returns the (n_steps, m) state history.
    """
    m = x0.shape[0]
    out = np.empty((n_steps, m), dtype=np.float64)
    x = x0.astype(np.float64).copy()
    ttil = np.zeros(n_steps, dtype=np.float64)
    for n in range(n_steps):
        t = 0.0
        tt = 0.0
        ok = True
        for j in range(m):
            xj = x[j]
            out[n, j] = xj
            if not (-BLOWUP < xj < BLOWUP):
                ok = False
            t += g[j] * xj
            tt += gtilde[j] * xj
        ttil[n] = tt
        if not ok:
            out[n:, :] = np.inf
            return out
        fb = 0.0
        if fb_gain != 0.0 and n >= fb_start and n >= gamma:
            fb = fb_gain * ttil[n - gamma]
        for j in range(m):
            xj = x[j]
            x[j] = xj * (2.0 - alpha * xj - alpha) + t + fb
    return out
