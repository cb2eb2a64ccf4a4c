"""Acceptance checks, one test per numbered criterion.

Each test prints one PASS line with the measured values (visible with
pytest -s); the test name carries the criterion number so a plain
pytest -v run shows one pass/fail line per criterion. Runtime budgets
are asserted inside the tests; the compiled kernels are warmed once
beforehand so budgets measure the runs, not JIT compilation.
"""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from fieldosc import cli, kernels, protocols
from fieldosc.analysis import (
    PairPeriodTwoFamily,
    coupled_pair_stability,
    detect_period,
    find_bifurcation,
    fixed_points_single,
)
from fieldosc.currentmode import (
    SineDipole,
    detect_interference,
    rms_impedance,
    simulate_current_field,
)
from fieldosc.maps import (
    CouplingGains,
    DelayGains,
    MapParams,
    OscState,
    delayed_step,
)
from fieldosc.medium import DipolePose
from fieldosc.sim import DeviceSpec, run_synchronous


@pytest.fixture(scope="module", autouse=True)
def warm_kernels():
    kernels.iterate_solo(0.1, 3.1, 10, 2)
    kernels.iterate_pair(0.1, -0.1, 3.1, 0.1, 10, 2)
    kernels.iterate_delayed(0.1, 3.1, 0.1, 0.1, 10, 2)
    kernels.iterate_swarm(np.full(3, 0.1), np.full(3, -0.01), 3.1, 10, 2.0,
                          2, 0, np.full(3, -0.01))


def test_c01_solo_period_two_attractor():
    t0 = time.perf_counter()
    trace = run_synchronous(protocols.solo_scenario(alpha=3.1, x0=0.1,
                                                    steps=500))
    tail = sorted(trace.devices[0].x[-2:])
    elapsed = time.perf_counter() - t0
    assert tail[1] == pytest.approx(0.08714, abs=1e-4)
    assert tail[0] == pytest.approx(-0.11940, abs=1e-4)
    assert elapsed < 1.0
    print(f"C1 PASS attractor ({tail[1]:.5f}, {tail[0]:.5f}) "
          f"within 1e-4 in {elapsed:.2f}s")


def test_c02_stability_regions():
    t0 = time.perf_counter()
    grid = np.linspace(-1.5, 3.5, 400)
    btol = 0.01
    checked = 0
    for a in grid:
        if abs(a) < 1e-9:
            continue
        rep = fixed_points_single(MapParams(alpha=float(a)))
        nonzero, zero = rep.points
        if min(abs(a - 1.0), abs(a - 3.0)) > btol:
            assert zero.stable == (1.0 < a < 3.0), f"x*=0 label at alpha={a}"
            checked += 1
        if min(abs(a - 1.0), abs(a + 1.0)) > btol:
            assert nonzero.stable == (-1.0 < a < 1.0), \
                f"x*=-(a-1)/a label at alpha={a}"
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    print(f"C2 PASS {checked} grid points labeled correctly "
          f"(boundary tol {btol}) in {elapsed:.2f}s")


def test_c03_pair_bifurcations():
    t0 = time.perf_counter()
    pd = find_bifurcation(PairPeriodTwoFamily(3.1, "inphase"), (-0.35, -0.05),
                          "k2", kind_hint="period_doubling")
    ns = find_bifurcation(PairPeriodTwoFamily(3.1, "antiphase"), (0.05, 0.45),
                          "k2", kind_hint="neimark_sacker")
    elapsed = time.perf_counter() - t0
    assert pd.param == pytest.approx(-0.21, abs=0.02)
    assert pd.kind == "period_doubling"
    assert pd.eigenvalue.imag == 0.0
    assert pd.eigenvalue.real < 0.0
    assert ns.param == pytest.approx(0.33, abs=0.02)
    assert ns.kind == "neimark_sacker"
    assert abs(ns.eigenvalue.imag) > 1e-4
    assert elapsed < 10.0
    print(f"C3 PASS doubling at k2={pd.param:.6f}, torus at k2={ns.param:.6f} "
          f"in {elapsed:.2f}s")


def test_c04_swarm_sync_times():
    t0 = time.perf_counter()
    plain = protocols.run_swarm_battery(m=10, e=-0.01, n_seeds=50, steps=250,
                                        epsilon=1e-2)
    mirror = protocols.run_swarm_battery(
        m=10, e=-0.01, n_seeds=50, steps=600, epsilon=1e-3,
        mirror={"gamma": 2, "gain": 2.0, "sense_weight": "nominal",
                "start_step": 0},
    )
    elapsed = time.perf_counter() - t0
    assert plain["median_sync"] <= 10
    assert mirror["median_sync"] <= 160
    assert mirror["p4_fraction"] >= 0.90
    assert elapsed < 10.0
    print(f"C4 PASS plain median {plain['median_sync']} steps, mirror median "
          f"{mirror['median_sync']} steps with P4 fraction "
          f"{mirror['p4_fraction']:.2f} in {elapsed:.1f}s")


def test_c05_group_size_estimator():
    t0 = time.perf_counter()
    curves = protocols.build_ratio_curves(m_lo=2, m_hi=15, n_seeds=100)
    diffs = np.diff(curves.m_ratios)
    assert np.all(diffs < 0.0), "m-curve is not strictly monotone"
    trips = protocols.roundtrip_group_size(curves)
    misses = {m: est for m, est in trips.items()
              if est is None or round(est) != m}
    elapsed = time.perf_counter() - t0
    assert not misses, f"round trip missed {misses}"
    assert elapsed < 60.0
    print(f"C5 PASS monotone curve, every m in 2..15 recovered "
          f"in {elapsed:.1f}s")


def test_c06_desync_envelope():
    t0 = time.perf_counter()
    sc = protocols.desync_scenario(skew_hz=0.2, g1=0.1, g2=0.1, duration=14.0)
    met = protocols.measure_desync_envelope(sc)
    elapsed = time.perf_counter() - t0
    a = met["cycle_amplitude"]
    hi = a * (0.1 + 0.1)
    lo = a * (0.1 - 0.1)
    assert met["envelope_max"] == pytest.approx(hi, rel=0.05)
    assert abs(met["envelope_min"] - lo) < 0.05 * hi
    assert met["beat_period_s"] == pytest.approx(5.0, rel=0.05)
    assert elapsed < 5.0
    print(f"C6 PASS envelope ({met['envelope_max']:.5f}, "
          f"{met['envelope_min']:.2e}) vs (A(g1+g2), A(g1-g2)) = "
          f"({hi:.5f}, {lo:.1f}), beat {met['beat_period_s']:.3f}s "
          f"in {elapsed:.1f}s")


def test_c07_delayed_system_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    for _ in range(100):
        alpha = rng.uniform(2.8, 3.3)
        k3 = rng.uniform(-1.1, 0.3)
        k4 = rng.uniform(-0.45, 0.3)
        x0 = rng.uniform(0.0, 0.1)
        p = MapParams(alpha=alpha)
        d = DelayGains(k3=k3, k4=k4)
        s = OscState.start(x0, gamma=2)
        u = v = w = x0
        try:
            for _ in range(1000):
                nxt = delayed_step(s, p, d)
                s.advance(nxt)
                u, v, w = u * (2.0 - alpha * u - alpha) + k3 * v + k4 * w, u, v
                assert s.x == u, "trajectories split"
        except Exception as exc:
            if "split" in str(exc):
                raise
            continue
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    print(f"C7 PASS 100 random draws bit-identical over 1000 steps "
          f"in {elapsed:.2f}s")


def test_c08_pair_fixed_point_integrity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(42)
    n_stable = 0
    for _ in range(50):
        alpha = rng.uniform(2.8, 3.3)
        k2 = rng.uniform(-0.4, 0.4)
        rep = coupled_pair_stability(MapParams(alpha=alpha), k2)
        assert rep.points, f"no roots at alpha={alpha}, k2={k2}"
        assert rep.residual < 1e-9
        assert len(rep.points) <= 16
        for pt in rep.points:
            if not pt.stable:
                continue
            n_stable += 1
            v = pt.point
            x, y = v + 1e-4 * np.array([0.6, -0.8])
            for _ in range(2000):
                x, y = (x * (2.0 - alpha * x - alpha) + k2 * y,
                        y * (2.0 - alpha * y - alpha) + k2 * x)
            v1 = np.array([
                v[0] * (2.0 - alpha * v[0] - alpha) + k2 * v[1],
                v[1] * (2.0 - alpha * v[1] - alpha) + k2 * v[0],
            ])
            back = min(float(np.hypot(x - v[0], y - v[1])),
                       float(np.hypot(x - v1[0], y - v1[1])))
            assert back < 1e-8, f"stable point did not attract: {back}"
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0
    print(f"C8 PASS 50 draws, residual<1e-9, <=16 points, {n_stable} stable "
          f"points re-attract 1e-4 kicks in {elapsed:.1f}s")


def test_c09_mirror_discrimination():
    t0 = time.perf_counter()
    out = protocols.discrimination_battery(count=200)
    elapsed = time.perf_counter() - t0
    assert out["accuracy"] >= 0.95
    assert out["mirror_as_swarm"] == 0
    assert elapsed < 60.0
    print(f"C9 PASS accuracy {out['accuracy']:.3f}, mirror-as-swarm "
          f"{out['mirror_as_swarm']} over 200 scenes in {elapsed:.1f}s")


def test_c10_current_mode(tmp_path):
    t0 = time.perf_counter()
    fs = 2000.0
    sensor = SineDipole(frequency=75.0, amplitude=1.0,
                        pose=DipolePose(position=(0.0, 0.0, 0.0)))
    peer = SineDipole(frequency=70.0, amplitude=1.0,
                      pose=DipolePose(position=(0.08, 0.0, 0.0)))
    s = simulate_current_field([peer], [], sensor, duration=10.0, fs=fs)
    det = detect_interference(s, [70.0, 75.0], fs, sense_freq=75.0)
    assert det.beats
    f_beat = max(det.beats, key=lambda fa: fa[1])[0]
    assert abs(f_beat - 5.0) <= det.bin_hz

    pure = simulate_current_field([], [], sensor, duration=10.0, fs=fs)
    r = rms_impedance(pure, fs, 75.0)
    rel = abs(r.values.mean() * math.sqrt(2.0) - 1.0)
    assert rel < 1e-3

    steps = {}
    for name in ("fig21a_object_event", "fig21b_dipole_event"):
        code, out_dir = cli.run_scenario(cli.resolve_scenario(name),
                                         out_root=tmp_path)
        assert code == 0
        rows = dict(
            line.split(",")[:2]
            for line in (out_dir / "classification.csv").read_text()
            .strip().splitlines()[1:]
        )
        steps[name] = (rows["classification"], abs(float(rows["rms_step"])))
    assert steps["fig21a_object_event"][0] == "object_event"
    assert steps["fig21b_dipole_event"][0] == "dipole_event"
    assert steps["fig21b_dipole_event"][1] > steps["fig21a_object_event"][1]
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0
    print(f"C10 PASS beat {f_beat:.2f}Hz (bin {det.bin_hz:.2f}), RMS off by "
          f"{rel:.1e}, dipole step {steps['fig21b_dipole_event'][1]:.4f} > "
          f"object step {steps['fig21a_object_event'][1]:.4f} "
          f"in {elapsed:.1f}s")


def test_c11_shipped_scenarios_deterministic(tmp_path):
    t0 = time.perf_counter()
    roots = (tmp_path / "run_a", tmp_path / "run_b")
    names = [name for name, _ in cli.shipped_scenarios()]
    assert len(names) == 20
    for name in names:
        path = cli.resolve_scenario(name)
        for root in roots:
            code, _ = cli.run_scenario(path, out_root=root)
            assert code == 0, f"{name} exited {code}"
    mismatched = []
    for name in names:
        da, db = roots[0] / name, roots[1] / name
        files_a = sorted(p.name for p in da.iterdir())
        files_b = sorted(p.name for p in db.iterdir())
        if files_a != files_b:
            mismatched.append((name, "file lists differ"))
            continue
        for f in files_a:
            if (da / f).read_bytes() != (db / f).read_bytes():
                mismatched.append((name, f))
    elapsed = time.perf_counter() - t0
    assert not mismatched, f"non-deterministic outputs: {mismatched}"
    assert elapsed < 300.0
    print(f"C11 PASS {len(names)} scenarios byte-identical across re-runs "
          f"in {elapsed:.1f}s")
