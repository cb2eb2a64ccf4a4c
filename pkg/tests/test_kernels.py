"""The compiled kernels must agree with the fallback bit for bit."""

import os
import subprocess
import sys

import numpy as np
import pytest

from fieldosc import accel, kernels, kernels_numpy

numba_missing = not accel.NUMBA_AVAILABLE
skip_without_numba = pytest.mark.skipif(numba_missing, reason="numba not importable")

if not numba_missing:
    from fieldosc import kernels_numba


@skip_without_numba
def test_solo_bit_identity():
    a = kernels_numba.iterate_solo(0.1, 3.1, 5000, 64)
    b = kernels_numpy.iterate_solo(0.1, 3.1, 5000, 64)
    assert np.array_equal(a, b)
    c = kernels_numba.iterate_solo(0.037, 3.7, 5000, 256)
    d = kernels_numpy.iterate_solo(0.037, 3.7, 5000, 256)
    assert np.array_equal(c, d)


@skip_without_numba
def test_pair_bit_identity():
    for k2 in (-0.3, -0.1, 0.0, 0.2, 0.4):
        a = kernels_numba.iterate_pair(0.1, -0.1, 3.1, k2, 3000, 64)
        b = kernels_numpy.iterate_pair(0.1, -0.1, 3.1, k2, 3000, 64)
        assert np.array_equal(a, b)


@skip_without_numba
def test_delayed_bit_identity():
    for k3, k4 in ((0.138, 0.15), (-0.45, -0.45), (0.45, 0.0), (0.0, -0.2)):
        a = kernels_numba.iterate_delayed(0.1, 3.1, k3, k4, 3000, 64)
        b = kernels_numpy.iterate_delayed(0.1, 3.1, k3, k4, 3000, 64)
        assert np.array_equal(a, b)


@skip_without_numba
def test_swarm_bit_identity():
    rng = np.random.default_rng(7)
    for m in (1, 3, 10):
        x0 = rng.uniform(0.0, 0.1, size=m)
        g = -0.01 - rng.uniform(0.0, 3e-3, size=m)
        gt = np.full(m, -0.01)
        a = kernels_numba.iterate_swarm(x0, g, 3.1, 500, 2.0, 2, 0, gt)
        b = kernels_numpy.iterate_swarm(x0, g, 3.1, 500, 2.0, 2, 0, gt)
        assert np.array_equal(a, b)


@skip_without_numba
def test_swarm_feedback_paths_live():
    rng = np.random.default_rng(8)
    x0 = rng.uniform(0.0, 0.1, size=5)
    g = -0.01 - rng.uniform(0.0, 3e-3, size=5)
    gt = np.full(5, -0.01)
    on = kernels_numpy.iterate_swarm(x0, g, 3.1, 400, 2.0, 2, 100, gt)
    off = kernels_numpy.iterate_swarm(x0, g, 3.1, 400, 0.0, 2, 100, gt)
    assert np.array_equal(on[:100], off[:100])
    assert not np.array_equal(on[150:], off[150:])


def test_backend_flag_consistency():
    assert kernels.BACKEND == accel.backend_name()
    assert kernels.BACKEND in ("numba", "python")
    if os.environ.get("FIELDOSC_NUMBA", "").strip().lower() in ("0", "false", "off"):
        assert kernels.BACKEND == "python"


def test_env_flag_forces_fallback_subprocess():
    env = dict(os.environ, FIELDOSC_NUMBA="0")
    out = subprocess.run(
        [sys.executable, "-c",
         "from fieldosc import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


def test_divergence_marks_nonfinite_tail():
    tail = kernels_numpy.iterate_solo(0.1, 6.0, 200, 64)
    assert not np.all(np.isfinite(tail))
    tail2 = kernels_numpy.iterate_pair(0.4, -0.4, 3.1, 5.0, 200, 64)
    assert not np.all(np.isfinite(tail2))
