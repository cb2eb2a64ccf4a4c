import numpy as np
import pytest

from fieldosc.maps import (
    BLOWUP_BOUND,
    CouplingGains,
    DelayGains,
    DivergenceError,
    MapParams,
    OscState,
    coupled_step,
    delayed_step,
    logistic_step,
    mirror_coupled_step,
    multi_coupled_step,
    pair_step,
    second_iterate_pair,
)

P31 = MapParams(alpha=3.1)


def test_logistic_step_by_hand():
    # x * (2 - alpha*x - alpha) evaluated directly
    assert logistic_step(0.1, P31) == 0.1 * (2.0 - 3.1 * 0.1 - 3.1)
    assert logistic_step(0.0, P31) == 0.0


def test_logistic_step_fixed_points():
    # both fixed points are stationary under the step
    for a in (0.5, 2.0, 3.1, -0.5):
        p = MapParams(alpha=a)
        assert logistic_step(0.0, p) == 0.0
        xs = -(a - 1.0) / a
        assert logistic_step(xs, p) == pytest.approx(xs, abs=1e-15)


def test_period_two_attractor_matches_polynomial_roots():
    """The long-run cycle must coincide with the exact second-iterate roots.

    The quartic f(f(x)) - x factors into the two fixed points and the
    2-cycle; the cycle roots are an oracle independent of iteration.
    """
    a = 3.1
    f = np.array([-a, 2.0 - a, 0.0])
    f2 = -a * np.polymul(f, f) + (2.0 - a) * np.pad(f, (2, 0))[:5]
    f2[-2] -= 1.0
    roots = sorted(
        float(np.real(r)) for r in np.roots(f2) if abs(np.imag(r)) < 1e-12
    )
    # drop the two fixed points 0 and -(a-1)/a
    cycle = [r for r in roots if abs(r) > 1e-9 and abs(r + (a - 1) / a) > 1e-9]
    assert len(cycle) == 2

    x = 0.1
    for _ in range(500):
        x = logistic_step(x, P31)
    seen = sorted([x, logistic_step(x, P31)])
    assert seen[0] == pytest.approx(cycle[0], abs=1e-12)
    assert seen[1] == pytest.approx(cycle[1], abs=1e-12)
    assert seen[0] == pytest.approx(-0.11940522963601376, abs=1e-13)
    assert seen[1] == pytest.approx(0.0871471651198847, abs=1e-13)


def test_blowup_raises():
    with pytest.raises(DivergenceError):
        logistic_step(2.0e6, MapParams(alpha=3.1))
    x = 0.5
    with pytest.raises(DivergenceError):
        for _ in range(200):
            x = logistic_step(x, MapParams(alpha=30.0))


def test_map_params_validation():
    with pytest.raises(ValueError):
        MapParams(alpha=float("nan"))
    with pytest.raises(ValueError):
        DelayGains(k3=float("inf"))


def test_coupled_step_removes_self_signal():
    # with a perfectly calibrated k1 the residual field is what remains
    g = CouplingGains(k1_pos=0.13, k1_neg=0.03, k2=0.5)
    xi_o = 0.1
    xi_w = 0.13 * xi_o + 0.02
    got = coupled_step(0.1, P31, g, xi_w, xi_o)
    assert got == pytest.approx(logistic_step(0.1, P31) + 0.5 * 0.02, abs=1e-15)
    # negative emission selects k1_neg
    xi_o = -0.1
    xi_w = 0.03 * xi_o
    got = coupled_step(0.1, P31, g, xi_w, xi_o)
    assert got == pytest.approx(logistic_step(0.1, P31), abs=1e-15)


def test_coupled_step_accepts_state_or_float():
    s = OscState.start(0.1)
    g = CouplingGains(k2=0.0)
    assert coupled_step(s, P31, g, 0.0, 0.0) == coupled_step(0.1, P31, g, 0.0, 0.0)


def test_pair_step_decoupled_equals_solo():
    x, y = 0.1, -0.05
    xn, yn = pair_step(x, y, P31, 0.0)
    assert xn == logistic_step(x, P31)
    assert yn == logistic_step(y, P31)


def test_second_iterate_is_composition():
    got = second_iterate_pair(0.1, -0.1, P31, 0.2)
    mid = pair_step(0.1, -0.1, P31, 0.2)
    assert got == pair_step(*mid, P31, 0.2)


def test_multi_coupled_step_matches_scalar_loop():
    rng = np.random.default_rng(5)
    for _ in range(20):
        m = int(rng.integers(2, 7))
        x = rng.uniform(-0.2, 0.2, m)
        G = rng.uniform(-0.05, 0.05, (m, m))
        got = multi_coupled_step(x, P31, G)
        want = np.array([
            logistic_step(x[i], P31) + float(G[i] @ x) for i in range(m)
        ])
        assert np.allclose(got, want, atol=1e-15)


def test_multi_coupled_step_shape_check():
    with pytest.raises(ValueError):
        multi_coupled_step(np.zeros(3), P31, np.zeros((2, 2)))


def test_delayed_step_uses_history():
    s = OscState.start(0.1, gamma=2)
    d = DelayGains(k3=0.3, k4=-0.2)
    # history is [0.1, 0.1, 0.1] at the start
    first = delayed_step(s, P31, d)
    assert first == pytest.approx(logistic_step(0.1, P31) + 0.3 * 0.1 - 0.2 * 0.1)
    s.advance(first)
    second = delayed_step(s, P31, d)
    assert second == pytest.approx(
        logistic_step(first, P31) + 0.3 * 0.1 - 0.2 * 0.1
    )


def test_osc_state_history_depth():
    s = OscState.start(0.5, gamma=0)
    # the ring always holds at least the two lags the delayed map needs
    assert s.past(0) == 0.5
    assert s.past(2) == 0.5
    with pytest.raises(ValueError):
        s.past(3)


def test_delayed_reduces_to_solo_when_gains_zero():
    s = OscState.start(0.1)
    d = DelayGains()
    x = 0.1
    for _ in range(50):
        nxt = delayed_step(s, P31, d)
        s.advance(nxt)
        x = logistic_step(x, P31)
        assert s.x == x


def test_mirror_coupled_step_delayed_column():
    m = 3
    x = np.array([0.1, 0.05, -0.02])
    G = np.zeros((m, m))
    Gt = np.full((m, m), -0.01)
    H = np.column_stack([np.full(m, 0.3), np.full(m, 0.2), x])
    got = mirror_coupled_step(x, H, P31, G, Gt, gamma=2)
    want = np.array([
        logistic_step(x[i], P31) + float(Gt[i] @ np.full(m, 0.3)) for i in range(m)
    ])
    assert np.allclose(got, want, atol=1e-15)
    with pytest.raises(ValueError):
        mirror_coupled_step(x, H[:, :1], P31, G, Gt, gamma=2)


def test_bounds_are_symmetric():
    assert logistic_step(BLOWUP_BOUND / 4, MapParams(alpha=0.0)) is not None
    with pytest.raises(DivergenceError):
        logistic_step(-2.0e6, MapParams(alpha=3.1))
