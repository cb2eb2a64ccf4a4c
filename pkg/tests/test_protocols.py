import numpy as np
import pytest

from fieldosc import protocols
from fieldosc.analysis import estimate_group_stats


def test_measure_ratio_frozen_value():
    r = protocols.measure_ratio(10, -0.01, seed=3)
    assert r == pytest.approx(-1.1055802867123938, abs=1e-12)


def test_measure_ratio_none_on_aperiodic():
    # far outside the coupling band the tail never settles on a cycle
    assert protocols.measure_ratio(10, -0.01, seed=3, alpha=3.7) is None


def test_swarm_battery_small():
    out = protocols.run_swarm_battery(m=4, e=-0.01, n_seeds=6, steps=200)
    assert len(out["rows"]) == 6
    assert out["p2_fraction"] == 1.0
    assert all(r["synchronized"] for r in out["rows"])
    assert out["median_sync"] <= 20


def test_swarm_battery_mirror_changes_period():
    # total delayed strength gain * m * |e| must sit in the period-four
    # window, so the per-path gain grows as the group shrinks
    mirror = {"gamma": 2, "gain": 5.0, "sense_weight": "nominal",
              "start_step": 0}
    out = protocols.run_swarm_battery(m=4, e=-0.01, n_seeds=6, steps=450,
                                      epsilon=1e-3, mirror=mirror)
    assert out["p4_fraction"] > 0.5


def test_ratio_curve_monotone_and_invertible():
    curves = protocols.build_ratio_curves(m_lo=4, m_hi=8, n_seeds=12,
                                          e_knots=3)
    diffs = np.diff(curves.m_ratios)
    assert np.all(diffs < 0.0)
    # round trip one size through the curve
    r = protocols.measure_ratio(6, -0.01, seed=123_456)
    m_est, _ = estimate_group_stats(r, curves)
    assert m_est == pytest.approx(6.0, abs=1.0)


def test_discrimination_battery_small():
    out = protocols.discrimination_battery(count=12, steps=700)
    assert out["accuracy"] >= 10 / 12
    assert out["mirror_as_swarm"] == 0
