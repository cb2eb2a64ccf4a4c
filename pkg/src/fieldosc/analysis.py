"""Dynamical-systems toolkit: fixed points, stability, bifurcations,
period classification, synchronization metrics, and the group-statistics
estimators built on them.

Jacobians of composed maps are always taken by central finite
differences; the single-map multiplier 2 - 2*alpha*x - alpha is the only
closed form used, and the finite-difference path is cross-checked
against it in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .maps import MapParams

STABILITY_TOL = 1e-9
RESIDUAL_TOL = 1e-9
FD_STEP = 1e-6
NS_IMAG_MIN = 1e-4
CONTINUATION_FLOOR = 1e-9


@dataclass
class FixedPoint:
    point: np.ndarray
    eigenvalues: np.ndarray
    stable: bool


@dataclass
class FixedPointReport:
    points: list
    residual: float
    flagged: bool = False

    def stable_points(self):
        return [p for p in self.points if p.stable]


@dataclass
class BifurcationPoint:
    param_name: str
    param: float
    kind: str
    eigenvalue: complex


@dataclass
class BifurcationDiagram:
    param_name: str
    values: np.ndarray
    samples: list
    diverged: np.ndarray
    critical_points: list = field(default_factory=list)


@dataclass
class PeriodClass:
    kind: str
    period: int | None
    cycle: np.ndarray | None
    amp_max: float
    amp_min: float


@dataclass
class SyncMetrics:
    synchronized: bool
    time_to_sync: int | None
    dispersion: np.ndarray
    envelope_max: float | None = None
    envelope_min: float | None = None
    envelope_ok: bool = False
    beat_period_s: float | None = None
    ratio: float | None = None


@dataclass
class CalibrationCurves:
    """Monotone lookup curves mapping cycle ratio to group statistics."""

    m_knots: np.ndarray = None
    m_ratios: np.ndarray = None
    e_knots: np.ndarray = None
    e_ratios: np.ndarray = None


def multiplier(x: float, alpha: float) -> float:
    """Derivative of the transformed map at x."""
    return 2.0 - 2.0 * alpha * x - alpha


def fixed_points_single(p: MapParams) -> FixedPointReport:
    """The two stationary states of the solo map with their multipliers."""
    if p.alpha == 0:
        raise ValueError("alpha must be nonzero")
    pts = []
    residual = 0.0
    for x in (-(p.alpha - 1.0) / p.alpha, 0.0):
        lam = multiplier(x, p.alpha)
        fx = x * (2.0 - p.alpha * x - p.alpha)
        residual = max(residual, abs(fx - x))
        pts.append(
            FixedPoint(
                point=np.array([x]),
                eigenvalues=np.array([lam + 0j]),
                stable=abs(lam) <= 1.0 + STABILITY_TOL,
            )
        )
    return FixedPointReport(points=pts, residual=residual)


def _pair_T2(V: np.ndarray, alpha: float, k2: float) -> np.ndarray:
    """Second iterate of the coupled pair map, batched over rows of V."""
    x, y = V[..., 0], V[..., 1]
    for _ in range(2):
        xn = x * (2.0 - alpha * x - alpha) + k2 * y
        yn = y * (2.0 - alpha * y - alpha) + k2 * x
        x, y = xn, yn
    return np.stack([x, y], axis=-1)


def _pair_T2_jacobian(v: np.ndarray, alpha: float, k2: float) -> np.ndarray:
    J = np.empty((2, 2))
    for d in range(2):
        e = np.zeros(2)
        e[d] = FD_STEP
        J[:, d] = (_pair_T2(v + e, alpha, k2) - _pair_T2(v - e, alpha, k2)) / (2 * FD_STEP)
    return J


def coupled_pair_stability(p: MapParams, k2: float, grid: int = 33,
                           box: float = 1.5) -> FixedPointReport:
    """All real fixed points of the pair map's second iterate.

    Newton from a dense multistart grid, batched; converged roots are
    deduplicated and each gets the eigenvalues of the finite-difference
    Jacobian. At most 16 real roots exist for this system.
    """
    alpha = p.alpha
    axis = np.linspace(-box, box, grid)
    gx, gy = np.meshgrid(axis, axis)
    V = np.stack([gx.ravel(), gy.ravel()], axis=1)
    active = np.ones(len(V), dtype=bool)
    for _ in range(60):
        if not active.any():
            break
        v = V[active]
        H = _pair_T2(v, alpha, k2) - v
        # batched central-difference Jacobian of H
        J = np.empty((len(v), 2, 2))
        for d in range(2):
            e = np.zeros(2)
            e[d] = FD_STEP
            J[:, :, d] = (_pair_T2(v + e, alpha, k2) - _pair_T2(v - e, alpha, k2)) / (
                2 * FD_STEP
            )
            J[:, d, d] -= 1.0
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        ok = np.isfinite(det) & (np.abs(det) > 1e-14) & np.all(np.isfinite(H), axis=1)
        dx = np.zeros_like(v)
        dx[ok, 0] = (J[ok, 1, 1] * H[ok, 0] - J[ok, 0, 1] * H[ok, 1]) / det[ok]
        dx[ok, 1] = (-J[ok, 1, 0] * H[ok, 0] + J[ok, 0, 0] * H[ok, 1]) / det[ok]
        v = v - dx
        lost = ~ok | ~np.all(np.isfinite(v), axis=1) | (np.abs(v).max(axis=1) > 10.0)
        V[active] = np.where(lost[:, None], np.nan, v)
        idx = np.flatnonzero(active)
        done = np.abs(dx).max(axis=1) < 1e-13
        active[idx[lost | done]] = False

    cand = V[np.all(np.isfinite(V), axis=1)]
    roots = []
    for v in cand:
        r = np.abs(_pair_T2(v, alpha, k2) - v).max()
        if r < RESIDUAL_TOL:
            for known in roots:
                if np.abs(known - v).max() < 1e-7:
                    break
            else:
                roots.append(v)
    if not roots:
        return FixedPointReport(points=[], residual=float("nan"), flagged=True)

    pts = []
    residual = 0.0
    for v in sorted(roots, key=lambda w: (w[0], w[1])):
        residual = max(residual, float(np.abs(_pair_T2(v, alpha, k2) - v).max()))
        lam = np.linalg.eigvals(_pair_T2_jacobian(v, alpha, k2))
        pts.append(
            FixedPoint(
                point=v.copy(),
                eigenvalues=lam,
                stable=bool(np.all(np.abs(lam) <= 1.0 + STABILITY_TOL)),
            )
        )
    return FixedPointReport(points=pts, residual=residual)


def delayed_jacobian(x: float, alpha: float, k3: float, k4: float) -> np.ndarray:
    return np.array(
        [
            [2.0 - 2.0 * x * alpha - alpha, k3, k4],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
        ]
    )


def delayed_stability(p: MapParams, d) -> FixedPointReport:
    """Stationary states of the delayed map seen as a 3-variable system."""
    if p.alpha == 0:
        raise ValueError("alpha must be nonzero")
    alpha, k3, k4 = p.alpha, d.k3, d.k4
    stationary = (0.0, (1.0 - alpha + k3 + k4) / alpha)
    pts = []
    residual = 0.0
    for x in stationary:
        fx = x * (2.0 - alpha * x - alpha) + k3 * x + k4 * x
        residual = max(residual, abs(fx - x))
        lam = np.linalg.eigvals(delayed_jacobian(x, alpha, k3, k4))
        pts.append(
            FixedPoint(
                point=np.array([x, x, x]),
                eigenvalues=lam,
                stable=bool(np.all(np.abs(lam) <= 1.0 + STABILITY_TOL)),
            )
        )
    return FixedPointReport(points=pts, residual=residual)


class SoloFixedPointFamily:
    """Eigenvalue of the solo map's zero state as alpha varies."""

    param_name = "alpha"

    def __call__(self, alpha, carry=None):
        return np.array([multiplier(0.0, alpha) + 0j]), None


class PairPeriodTwoFamily:
    """Eigenvalues along a period-2 branch of the coupled pair as k2 varies.

    branch "inphase" follows the synchronized orbit (both devices on the
    same cycle phase), "antiphase" the orbit with the devices half a
    cycle apart. Points are continued by Newton from the previous
    parameter value.
    """

    param_name = "k2"

    def __init__(self, alpha: float, branch: str = "inphase"):
        self.alpha = alpha
        if branch not in ("inphase", "antiphase"):
            raise ValueError("branch must be inphase or antiphase")
        self.branch = branch

    def _init_point(self) -> np.ndarray:
        tail = kernels.iterate_solo(0.1, self.alpha, 600, 2)
        a, b = float(tail[0]), float(tail[1])
        if self.branch == "inphase":
            return np.array([a, a])
        return np.array([a, b])

    def _refine(self, v: np.ndarray, k2: float) -> np.ndarray:
        for _ in range(60):
            H = _pair_T2(v, self.alpha, k2) - v
            J = _pair_T2_jacobian(v, self.alpha, k2) - np.eye(2)
            step = np.linalg.solve(J, H)
            v = v - step
            if np.abs(step).max() < 1e-13:
                break
        if np.abs(_pair_T2(v, self.alpha, k2) - v).max() > 1e-8:
            raise ValueError(f"branch continuation lost at k2={k2}")
        return v

    def __call__(self, k2, carry=None):
        k2 = float(k2)
        if carry is None:
            # The decoupled orbit is exact at k2=0; walk the branch out
            # to the requested coupling so Newton never leaves its basin.
            v = self._init_point()
            n = max(1, int(np.ceil(abs(k2) / 0.02)))
            for kk in np.linspace(0.0, k2, n + 1)[1:]:
                v = self._refine(v, float(kk))
        else:
            v = self._refine(carry, k2)
        lam = np.linalg.eigvals(_pair_T2_jacobian(v, self.alpha, k2))
        return lam, v


def find_bifurcation(map_family, param_range, param_name: str | None = None,
                     kind_hint: str | None = None, tol: float = 1e-4,
                     coarse: int = 41) -> BifurcationPoint:
    """Locate where the family's dominant eigenvalue crosses the unit circle.

    Scans the range coarsely (threading the family's continuation state
    through), then bisects the first bracketing interval down to tol.
    The crossing is classified by the eigenvalue that reaches the circle:
    a complex pair is a Neimark-Sacker point, a real negative eigenvalue
    a period doubling.
    """
    lo, hi = param_range
    name = param_name or getattr(map_family, "param_name", "param")
    grid = np.linspace(lo, hi, coarse)
    carry = None
    margins = []
    carries = []
    eigs = []
    for pval in grid:
        lam, carry = map_family(pval, carry)
        margins.append(float(np.abs(lam).max()) - 1.0)
        eigs.append(lam)
        carries.append(carry)

    brackets = [
        i for i in range(coarse - 1)
        if margins[i] == 0.0 or (margins[i] < 0) != (margins[i + 1] < 0)
    ]
    if not brackets:
        raise ValueError(f"no stability change of {name} in {param_range}")

    def classify(lam: np.ndarray):
        k = int(np.argmax(np.abs(lam)))
        crossing = lam[k]
        if abs(crossing.imag) > NS_IMAG_MIN:
            return "neimark_sacker", crossing
        if crossing.real < 0:
            return "period_doubling", crossing
        return "fold", crossing

    pick = brackets[0]
    if kind_hint is not None:
        for i in brackets:
            kind, _ = classify(eigs[i + 1] if margins[i + 1] > 0 else eigs[i])
            if kind == kind_hint:
                pick = i
                break

    a, b = grid[pick], grid[pick + 1]
    sa = margins[pick]
    carry = carries[pick]
    lam_b = eigs[pick + 1]
    while b - a > tol:
        mid = 0.5 * (a + b)
        lam, carry = map_family(mid, carry)
        sm = float(np.abs(lam).max()) - 1.0
        if (sm < 0) == (sa < 0):
            a, sa = mid, sm
        else:
            b, lam_b = mid, lam
    kind, crossing = classify(lam_b)
    if kind_hint is not None and kind != kind_hint:
        raise ValueError(f"crossing at {name}={b:.5g} classifies as {kind}, not {kind_hint}")
    return BifurcationPoint(param_name=name, param=0.5 * (a + b), kind=kind,
                            eigenvalue=complex(crossing))


_SCAN_FAMILIES = ("solo_alpha", "pair_k2", "delayed_k3", "delayed_k4", "delayed_alpha")


def bifurcation_scan(map_family: str, param_range, grid_size: int,
                     transient: int = 500, samples: int = 64,
                     initial_conditions=("fixed", 0.1), seed: int = 0,
                     alpha: float = 3.1, k2: float = 0.0,
                     k3: float = 0.0, k4: float = 0.0,
                     workers: int = 1) -> BifurcationDiagram:
    """Attractor samples over a parameter grid for one of the map families.

    initial_conditions is ("fixed", x0), ("random", lo, hi), or
    ("continue",): continuation reuses the final state of the previous
    grid point and forces serial evaluation. Results are identical for
    any worker count because random starts are pre-drawn.
    """
    if map_family not in _SCAN_FAMILIES:
        raise ValueError(f"unknown family {map_family!r}; pick from {_SCAN_FAMILIES}")
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    values = np.linspace(param_range[0], param_range[1], grid_size)
    policy = initial_conditions[0]
    rng = np.random.default_rng(seed)
    if policy == "fixed":
        starts = np.full(grid_size, float(initial_conditions[1]))
    elif policy == "random":
        lo, hi = float(initial_conditions[1]), float(initial_conditions[2])
        starts = rng.uniform(lo, hi, size=grid_size)
    elif policy == "continue":
        starts = np.full(grid_size, 0.1)
        workers = 1
    else:
        raise ValueError(f"unknown initial-condition policy {policy!r}")

    n_total = transient + samples

    def run_point(i: int, x0: float) -> np.ndarray:
        pval = values[i]
        if map_family == "solo_alpha":
            return kernels.iterate_solo(x0, pval, n_total, samples)
        if map_family == "pair_k2":
            # The diagonal x == y is invariant under the symmetric pair map, so a
            # shared start would never leave the in-phase subspace.  Mirror the
            # partner to land in the basin of the alternating orbit.
            tail = kernels.iterate_pair(x0, -x0, alpha, pval, n_total, samples)
            return tail[:, 0].copy()
        if map_family == "delayed_k3":
            return kernels.iterate_delayed(x0, alpha, pval, k4, n_total, samples)
        if map_family == "delayed_k4":
            return kernels.iterate_delayed(x0, alpha, k3, pval, n_total, samples)
        return kernels.iterate_delayed(x0, pval, k3, k4, n_total, samples)

    out = [None] * grid_size
    if policy == "continue":
        x0 = starts[0]
        for i in range(grid_size):
            tail = run_point(i, x0)
            out[i] = tail
            if np.isfinite(tail[-1]):
                x0 = float(tail[-1])
                # A state that decayed onto a stable point can underflow to
                # the denormal floor, where the next parameter's repeller
                # cannot shed it (the update rounds back to the same value).
                # Reseed just off the point so later branches stay reachable.
                if abs(x0) < CONTINUATION_FLOOR:
                    x0 = CONTINUATION_FLOOR if x0 >= 0 else -CONTINUATION_FLOOR
    elif workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            futs = {pool.submit(run_point, i, starts[i]): i for i in range(grid_size)}
            for f, i in futs.items():
                out[i] = f.result()
    else:
        for i in range(grid_size):
            out[i] = run_point(i, starts[i])

    diverged = np.array([not bool(np.all(np.isfinite(s))) for s in out])
    samples_out = [
        s[np.isfinite(s)] if diverged[i] else s for i, s in enumerate(out)
    ]
    return BifurcationDiagram(
        param_name=map_family, values=values, samples=samples_out, diverged=diverged
    )


PERIOD_KS = (1, 2, 4, 8, 16, 32)


def detect_period(trace_tail, tol: float = 1e-6, diverged: bool = False) -> PeriodClass:
    """Smallest period k in {1, 2, 4, ..., 32} holding over the tail."""
    tail = np.asarray(trace_tail, dtype=np.float64)
    if diverged or not np.all(np.isfinite(tail)):
        return PeriodClass("divergent", None, None, float("nan"), float("nan"))
    ks = [k for k in PERIOD_KS if 8 * k <= len(tail)]
    if not ks:
        raise ValueError(f"tail of {len(tail)} samples is too short for period detection")
    amp_max = float(tail.max())
    amp_min = float(tail.min())
    for k in ks:
        if np.abs(tail[k:] - tail[:-k]).max() < tol:
            return PeriodClass(f"P{k}", k, tail[-k:].copy(), amp_max, amp_min)
    return PeriodClass("aperiodic", None, None, amp_max, amp_min)


def envelope_series(series, window: int) -> np.ndarray:
    """Half peak-to-peak over a sliding window (full overlap)."""
    s = np.asarray(series, dtype=np.float64)
    if len(s) < window:
        raise ValueError("series shorter than the envelope window")
    w = np.lib.stride_tricks.sliding_window_view(s, window)
    return 0.5 * (w.max(axis=1) - w.min(axis=1))


def _beat_period(h: np.ndarray, dt: float) -> float | None:
    """Median spacing of envelope-null regions.

    Runs clipped by either end of the series have biased centers and are
    dropped.
    """
    thr = 0.5 * (h.max() + h.min())
    below = h < thr
    edges = np.flatnonzero(np.diff(below.astype(np.int8)))
    runs = []
    start = 0 if below[0] else None
    for e in edges:
        if below[e + 1] and start is None:
            start = e + 1
        elif not below[e + 1] and start is not None:
            if start > 0:
                runs.append(0.5 * (start + e))
            start = None
    if len(runs) < 2:
        return None
    return float(np.median(np.diff(runs)) * dt)


def cycle_ratio(series, period: int) -> float | None:
    """Mean of x_{n-1}/x_n around one cycle at the end of the series."""
    s = np.asarray(series, dtype=np.float64)
    if len(s) < period + 1:
        return None
    seg = s[-(period + 1):]
    if np.any(seg == 0.0):
        return None
    return float(np.mean(seg[:-1] / seg[1:]))


def sync_envelope_metrics(trace, epsilon: float = 1e-3, window: int = 8) -> SyncMetrics:
    """Dispersion, sync time, sensed-field envelope, and cycle ratio."""
    X = trace.x_matrix(("oscillator",))
    listeners = trace.listener_ids() if hasattr(trace, "listener_ids") else []
    if X.shape[1] == 0 and not listeners:
        raise ValueError("need oscillators or a listener channel")

    if X.shape[1] >= 1 and X.shape[0] > 0:
        disp = X.max(axis=1) - X.min(axis=1)
        rev = np.maximum.accumulate(disp[::-1])[::-1]
        held = rev < epsilon
        if held.any():
            synchronized = True
            time_to_sync = int(np.argmax(held))
        else:
            synchronized = False
            time_to_sync = None
    else:
        disp = np.zeros(0)
        synchronized = False
        time_to_sync = None

    if listeners:
        ld = next(d for d in trace.devices if d.device_id == listeners[0])
        series, times = ld.xi_w, ld.times
    elif trace.devices:
        series, times = trace.devices[0].xi_w, trace.devices[0].times
    else:
        series, times = np.zeros(0), np.zeros(0)

    envelope_ok = len(series) >= 2 * window
    env_max = env_min = beat = None
    if envelope_ok:
        h = envelope_series(series, window)
        env_max = float(h.max())
        env_min = float(h.min())
        dt = float(np.median(np.diff(times))) if len(times) > 1 else 1.0
        beat = _beat_period(h, dt)

    ratio = None
    if X.shape[1] >= 1 and X.shape[0] >= 80 and (synchronized or X.shape[1] == 1):
        tail = X[-64:, 0]
        pc = detect_period(tail, tol=max(1e-6, 1e-6 * np.abs(tail).max()))
        if pc.period is not None:
            ratio = cycle_ratio(X[:, 0], pc.period)

    return SyncMetrics(
        synchronized=synchronized,
        time_to_sync=time_to_sync,
        dispersion=disp,
        envelope_max=env_max,
        envelope_min=env_min,
        envelope_ok=envelope_ok,
        beat_period_s=beat,
        ratio=ratio,
    )


def estimate_group_stats(ratio: float, calibration: CalibrationCurves):
    """Invert the calibration curves at a measured cycle ratio.

    Returns (m_estimate, e_estimate). An estimate is None when its curve
    is absent or does not cover the ratio; if no present curve covers
    it, the ratio is outside the calibrated range and that is an error.
    """
    m_est = e_est = None
    errors = []
    if calibration.m_ratios is not None:
        try:
            m_est = _invert_curve(ratio, calibration.m_knots,
                                  calibration.m_ratios, "m")
        except ValueError as exc:
            errors.append(str(exc))
    if calibration.e_ratios is not None:
        try:
            e_est = _invert_curve(ratio, calibration.e_knots,
                                  calibration.e_ratios, "e")
        except ValueError as exc:
            errors.append(str(exc))
    if errors and m_est is None and e_est is None:
        raise ValueError("; ".join(errors))
    return m_est, e_est


def _invert_curve(r: float, knots, ratios, label: str) -> float:
    """Nearest-neighbor with linear interpolation between knots.

    The calibrated range extends half an end gap past each end knot
    (the end knot's nearest-neighbor cell); inside that margin the end
    knot is returned, beyond it the ratio is out of range.
    """
    knots = np.asarray(knots, dtype=np.float64)
    ratios = np.asarray(ratios, dtype=np.float64)
    order = np.argsort(ratios)
    rs, ks = ratios[order], knots[order]
    lo = rs[0] - 0.5 * (rs[1] - rs[0])
    hi = rs[-1] + 0.5 * (rs[-1] - rs[-2])
    if not (lo <= r <= hi):
        raise ValueError(
            f"ratio {r:.6g} outside the calibrated {label}-curve span "
            f"[{lo:.6g}, {hi:.6g}]"
        )
    return float(np.interp(r, rs, ks))


def classify_reflection(trace, window: int = 64) -> str:
    """Label a trace as swarm, mirror, none, or indeterminate.

    The discriminating signal is history dependence: a mirror feeds the
    swarm's own past back, so an established period-2 epoch later gives
    way to period-4 (or loses synchronization); a plain swarm stays on
    synchronized period-2; a solo device shows period-2 with nothing
    else in its sensed field. All thresholds scale with the trace
    amplitude.
    """
    if getattr(trace, "diverged", False):
        return "indeterminate"
    X = trace.x_matrix(("oscillator",))
    if X.shape[0] < 2 * window:
        return "indeterminate"
    amp = float(np.abs(X).max())
    if amp == 0.0:
        return "indeterminate"
    ptol = 1e-3 * amp
    eps = 0.05 * amp
    m = X.shape[1]

    series = X[:, 0]
    n_win = len(series) // window
    kinds = []
    for w in range(n_win):
        seg = series[w * window:(w + 1) * window]
        kinds.append(detect_period(seg, tol=ptol).kind)

    if m == 1:
        tail_kind = kinds[-1] if kinds else None
        if tail_kind in ("P1", "P2"):
            return "none"
        return "indeterminate"

    disp = X.max(axis=1) - X.min(axis=1)
    synced = disp < eps
    # first index from which sync holds for at least 20 consecutive steps
    sync_at = None
    run = 0
    for i, s in enumerate(synced):
        run = run + 1 if s else 0
        if run >= 20:
            sync_at = i - 19
            break
    crash = False
    if sync_at is not None:
        later = disp[sync_at + 20:]
        crash = bool((later > 2 * eps).any())

    saw_p2 = False
    for i, kind in enumerate(kinds):
        if kind == "P2" and i + 1 < len(kinds) and kinds[i + 1] == "P2":
            saw_p2 = True
        elif saw_p2 and kind in ("P4", "P8", "P16", "P32", "aperiodic"):
            return "mirror"
    if saw_p2 and crash:
        return "mirror"
    if sync_at is not None and not crash:
        post = [k for i, k in enumerate(kinds) if (i + 1) * window > sync_at + window]
        if post and all(k == "P2" for k in post):
            return "swarm"
    return "indeterminate"
