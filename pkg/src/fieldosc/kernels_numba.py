"""Compiled iteration kernels.

Same contracts and arithmetic order as kernels_numpy; see there for the
divergence convention. fastmath stays off so results match the fallback
bit for bit.
"""

import numpy as np
from numba import njit

BLOWUP = 1.0e6


@njit(cache=True, nogil=True)
def iterate_solo(x0, alpha, n_total, n_keep):
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


@njit(cache=True, nogil=True)
def iterate_pair(x0, y0, alpha, k2, n_total, n_keep):
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


@njit(cache=True, nogil=True)
def iterate_delayed(x0, alpha, k3, k4, n_total, n_keep):
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


@njit(cache=True, nogil=True)
def iterate_swarm(x0, g, alpha, n_steps, fb_gain, gamma, fb_start, gtilde):
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
