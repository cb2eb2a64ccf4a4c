"""Device specifications, scenarios, and the two simulation engines.

The synchronous engine advances every device once per step from the
pre-update emission vector. The event-driven engine gives each device
its own clock (with fractional skew) and models emissions as pulses of
finite duration, which is what produces the beating envelopes when
clocks drift past each other. Time in the event engine is exact rational
arithmetic so long runs keep stable phase.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from fractions import Fraction
from statistics import median

import numpy as np

from .maps import (
    BLOWUP_BOUND,
    CouplingGains,
    DelayGains,
    DivergenceError,
    MapParams,
)
from .medium import (
    CouplingMatrix,
    NoiseModel,
    SensingChain,
    coupling_from_geometry,
    mirror_response,
    sample_couplings,
)

DAC_LIMIT = 2048
VOLTS_PER_COUNT = 5.0 / 2048.0

ROLES = ("oscillator", "listener", "mirror")


class SaturationError(ArithmeticError):
    """DAC input outside the signed 12-bit range."""

    def __init__(self, value):
        self.value = value
        super().__init__(f"|{value!r}| exceeds the DAC limit {DAC_LIMIT}")


class CalibrationError(RuntimeError):
    pass


class ValidationError(ValueError):
    """Scenario fails a structural or physical precondition."""


def dac_quantize(x: float, k_dac: float) -> int:
    """Map state to signed DAC counts; saturates outside +-2048."""
    v = x * k_dac
    if not abs(v) < DAC_LIMIT:
        raise SaturationError(v)
    return round(v)


@dataclass
class DeviceSpec:
    role: str = "oscillator"
    map: MapParams = field(default_factory=lambda: MapParams(alpha=3.1))
    gains: CouplingGains = field(default_factory=CouplingGains)
    delay: DelayGains | None = None
    x0: float = 0.1
    clock_period: float = 0.002
    clock_skew: float = 0.0
    pulse_duration: float | None = None
    k_dac: float = 12000.0
    mirror_gain: float = 1.0
    mirror_invert: bool = False
    mirror_sense_weight: float | None = None
    start_step: int = 0
    stop_step: int | None = None

    def validate(self):
        if self.role not in ROLES:
            raise ValidationError(f"unknown role {self.role!r}")
        if self.clock_period <= 0:
            raise ValidationError("clock_period must be positive")
        if self.pulse_duration is not None and self.pulse_duration > self.clock_period:
            raise ValidationError("pulse_duration cannot exceed clock_period")
        if not abs(self.x0 * self.k_dac) < DAC_LIMIT:
            raise ValidationError(
                f"x0 {self.x0} at k_dac {self.k_dac} exceeds the DAC range"
            )
        if self.role == "mirror" and self.delay is None:
            raise ValidationError("mirror devices need DelayGains")
        if not self.map.in_studied_band():
            # Outside the studied band the dynamics are untested; warn, not fail.
            import warnings

            warnings.warn(f"alpha {self.map.alpha} outside the studied band")

    def effective_period(self) -> float:
        return self.clock_period * (1.0 + self.clock_skew)

    def active_at(self, step: int) -> bool:
        if step < self.start_step:
            return False
        return self.stop_step is None or step < self.stop_step


@dataclass
class CouplingSpec:
    """How the scenario obtains its coupling matrix."""

    kind: str = "sampled"
    e: float = -0.01
    spread: float = 3.0e-3
    include_self: bool = False
    poses: list = None
    decay_exponent: float = 2.2
    ref_gain: float = 1.0
    matrix: np.ndarray | None = None

    def build(self, m: int, rng) -> np.ndarray:
        if self.kind == "sampled":
            return sample_couplings(m, self.e, rng, self.spread, self.include_self).g
        if self.kind == "geometric":
            if self.poses is None or len(self.poses) != m:
                raise ValidationError("geometric coupling needs one pose per device")
            return coupling_from_geometry(self.poses, self.decay_exponent, self.ref_gain).g
        if self.kind == "explicit":
            G = np.asarray(self.matrix, dtype=np.float64)
            if G.shape != (m, m):
                raise ValidationError(
                    f"explicit matrix shape {G.shape} does not match {m} devices"
                )
            return G.copy()
        raise ValidationError(f"unknown coupling kind {self.kind!r}")


@dataclass
class Scenario:
    devices: list
    coupling: CouplingSpec = field(default_factory=CouplingSpec)
    noise: NoiseModel | None = None
    chain: SensingChain | None = None
    steps: int | None = None
    duration: float | None = None
    seed: int = 0

    def validate(self):
        if (self.steps is None) == (self.duration is None):
            raise ValidationError("exactly one of steps/duration must be set")
        for d in self.devices:
            d.validate()
        if self.coupling.kind == "explicit":
            G = np.asarray(self.coupling.matrix)
            if G.shape != (len(self.devices), len(self.devices)):
                raise ValidationError("explicit coupling dimension mismatch")


@dataclass
class DeviceRecord:
    device_id: int
    role: str
    steps: np.ndarray
    times: np.ndarray
    x: np.ndarray
    xi_o: np.ndarray
    xi_w: np.ndarray


@dataclass
class SimTrace:
    devices: list
    event_log: list = field(default_factory=list)
    diverged: bool = False
    diverged_step: int | None = None
    final_states: np.ndarray | None = None
    dt: float = 1.0
    synthetic: bool = False

    @property
    def m(self) -> int:
        return len(self.devices)

    @property
    def n_steps(self) -> int:
        if not self.devices:
            return 0
        return min(len(d.x) for d in self.devices)

    def x_matrix(self, roles=("oscillator",)) -> np.ndarray:
        """(steps, k) state matrix over devices of the given roles.

        Rows are truncated to the shortest selected channel, which only
        matters for event-driven traces.
        """
        cols = [d.x for d in self.devices if d.role in roles]
        if not cols:
            return np.zeros((0, 0))
        n = min(len(c) for c in cols)
        return np.stack([c[:n] for c in cols], axis=1)

    def sensed(self, device_id: int) -> np.ndarray:
        return self.devices[device_id].xi_w

    def listener_ids(self):
        return [d.device_id for d in self.devices if d.role == "listener"]

    @classmethod
    def from_states(cls, X, dt: float = 1.0) -> "SimTrace":
        """Wrap a plain (steps, m) state history as a trace of oscillators."""
        X = np.asarray(X, dtype=np.float64)
        n, m = X.shape
        steps = np.arange(n)
        times = steps * dt
        devs = [
            DeviceRecord(
                device_id=j,
                role="oscillator",
                steps=steps.copy(),
                times=times.copy(),
                x=X[:, j].copy(),
                xi_o=X[:, j].copy(),
                xi_w=np.zeros(n),
            )
            for j in range(m)
        ]
        diverged = not bool(np.all(np.isfinite(X)))
        return cls(devices=devs, dt=dt, synthetic=True, diverged=diverged)


def build_coupling(scenario: Scenario, rng) -> np.ndarray:
    """Full sensing matrix for the scenario's device list.

    Rows come from the coupling source. Mirror rows are replaced by the
    nominal sense weight when one is configured, mirror emissions reach
    every non-mirror receiver with weight one (the stored signal already
    carries the path weights), and mirrors never sense other mirrors.
    """
    devs = scenario.devices
    m = len(devs)
    G = scenario.coupling.build(m, rng) if m else np.zeros((0, 0))
    mirrors = [i for i, d in enumerate(devs) if d.role == "mirror"]
    listeners = [i for i, d in enumerate(devs) if d.role == "listener"]
    for mi in mirrors:
        w = devs[mi].mirror_sense_weight
        if w is not None:
            G[mi, :] = w
        G[mi, mi] = 0.0
        for other in mirrors:
            G[mi, other] = 0.0
        for li in listeners:
            G[mi, li] = 0.0
        for i in range(m):
            if i != mi and devs[i].role != "mirror":
                G[i, mi] = 1.0
    return G


def _osc_update(x, alpha, gains: CouplingGains, xi_w, xi_o):
    k1 = gains.k1_for(xi_o)
    nxt = x * (2.0 - alpha * x - alpha) + gains.k2 * (xi_w - k1 * xi_o)
    if not (-BLOWUP_BOUND < nxt < BLOWUP_BOUND):
        raise DivergenceError(nxt, "device update")
    return nxt


def run_synchronous(scenario: Scenario, n_steps: int | None = None) -> SimTrace:
    """Advance all devices in lockstep for n_steps updates.

    Per step: every device writes its emission, every device reads the
    superposed field, then all map states advance at once. A diverging
    device truncates the trace at the failing step and flags it.
    """
    scenario.validate()
    n = n_steps if n_steps is not None else scenario.steps
    if n is None:
        raise ValidationError("synchronous runs need a step count")
    devs = scenario.devices
    m = len(devs)
    rng = np.random.default_rng(scenario.seed)
    G = build_coupling(scenario, rng)
    noise = scenario.noise
    if noise is not None:
        noise.reset()
    chains = [scenario.chain.fresh() if scenario.chain is not None else None for _ in devs]

    X = np.zeros((n, m))
    XO = np.zeros((n, m))
    XW = np.zeros((n, m))
    x = np.array([d.x0 for d in devs], dtype=np.float64)
    mirror_hist = {i: [] for i, d in enumerate(devs) if d.role == "mirror"}
    log = []
    started = [d.start_step == 0 for d in devs]
    for i, s in enumerate(started):
        if s:
            log.append((0.0, i, "start"))

    trace = SimTrace(devices=[], event_log=log, dt=devs[0].clock_period if devs else 1.0)
    executed = n
    emissions = np.zeros(m)

    for step in range(n):
        t = step * trace.dt
        for i, d in enumerate(devs):
            if d.active_at(step) and not started[i] and step == d.start_step:
                started[i] = True
                log.append((t, i, "start"))
            if d.stop_step is not None and step == d.stop_step:
                log.append((t, i, "stop"))

        # write phase: oscillators emit their state, listeners stay silent
        for i, d in enumerate(devs):
            if d.role == "oscillator" and d.active_at(step):
                emissions[i] = x[i]
            elif d.role != "mirror":
                emissions[i] = 0.0
        # mirrors sense the oscillator field, store it, then emit the replay
        for i, d in enumerate(devs):
            if d.role != "mirror":
                continue
            sensed = float(np.dot(G[i], emissions))
            if chains[i] is not None:
                sensed = chains[i].apply(sensed)
            mirror_hist[i].append(sensed)
            gamma = d.delay.gamma
            if d.active_at(step) and len(mirror_hist[i]) >= gamma + 1:
                emissions[i] = mirror_response(
                    mirror_hist[i], gamma, d.mirror_gain, d.mirror_invert
                )
            else:
                emissions[i] = 0.0

        nv = noise.sample_vec(m) if noise is not None else None

        # read phase
        for i, d in enumerate(devs):
            if d.role == "mirror":
                XW[step, i] = mirror_hist[i][-1]
                X[step, i] = mirror_hist[i][-1]
                XO[step, i] = emissions[i]
                continue
            s = float(np.dot(G[i], emissions))
            if chains[i] is not None:
                s = chains[i].apply(s)
            if nv is not None:
                s += nv[i]
            XW[step, i] = s
            X[step, i] = x[i]
            XO[step, i] = emissions[i]

        # update phase
        try:
            for i, d in enumerate(devs):
                if d.role == "oscillator" and d.active_at(step):
                    x[i] = _osc_update(
                        x[i], d.map.alpha, d.gains, XW[step, i], emissions[i]
                    )
        except DivergenceError:
            executed = step + 1
            trace.diverged = True
            trace.diverged_step = step
            log.append((t, i, "diverged"))
            break

    steps_idx = np.arange(executed)
    for i, d in enumerate(devs):
        trace.devices.append(
            DeviceRecord(
                device_id=i,
                role=d.role,
                steps=steps_idx.copy(),
                times=steps_idx * d.clock_period,
                x=X[:executed, i].copy(),
                xi_o=XO[:executed, i].copy(),
                xi_w=XW[:executed, i].copy(),
            )
        )
    trace.final_states = x.copy()
    return trace


@dataclass
class _Pulse:
    value: float = 0.0
    start: Fraction = Fraction(0)
    duration: Fraction = Fraction(0)

    def active_at(self, t: Fraction) -> bool:
        return self.start <= t < self.start + self.duration


def run_event_driven(scenario: Scenario, duration: float | None = None) -> SimTrace:
    """Advance devices on their own skewed clocks.

    Each tick a device rewrites its pulse, then samples the field formed
    by all pulses active at that instant. Devices sharing an exact tick
    time all write before any of them reads, so the zero-skew case
    degenerates to the synchronous engine sampled at the ticks.
    """
    scenario.validate()
    T = duration if duration is not None else scenario.duration
    if T is None:
        raise ValidationError("event-driven runs need a duration")
    devs = scenario.devices
    m = len(devs)
    rng = np.random.default_rng(scenario.seed)
    G = build_coupling(scenario, rng)
    noise = scenario.noise
    if noise is not None:
        noise.reset()
    chains = [scenario.chain.fresh() if scenario.chain is not None else None for _ in devs]

    periods = [
        Fraction(d.clock_period) * (1 + Fraction(d.clock_skew)) for d in devs
    ]
    pul_durs = [
        Fraction(d.pulse_duration) if d.pulse_duration is not None else periods[i]
        for i, d in enumerate(devs)
    ]
    horizon = Fraction(T)

    x = [d.x0 for d in devs]
    pulses = [_Pulse() for _ in devs]
    mirror_hist = {i: [] for i, d in enumerate(devs) if d.role == "mirror"}
    tick_count = [0] * m
    rec = {i: {"steps": [], "times": [], "x": [], "xo": [], "xw": []} for i in range(m)}
    started = [d.start_step == 0 for d in devs]
    log = [(0.0, i, "start") for i, d in enumerate(devs) if d.start_step == 0]
    trace = SimTrace(devices=[], event_log=log, dt=devs[0].clock_period if devs else 1.0)

    heap = [(Fraction(0), i) for i in range(m)]
    heapq.heapify(heap)
    diverged = False

    while heap and not diverged:
        t, _first = heap[0]
        if t > horizon:
            break
        group = []
        while heap and heap[0][0] == t:
            group.append(heapq.heappop(heap)[1])
        group.sort()

        # write phase for every device ticking now
        for i in group:
            d = devs[i]
            n_i = tick_count[i]
            if not started[i] and d.active_at(n_i):
                started[i] = True
                log.append((float(t), i, "start"))
            if d.stop_step is not None and n_i == d.stop_step:
                log.append((float(t), i, "stop"))
            if d.role == "oscillator":
                v = x[i] if d.active_at(n_i) else 0.0
                pulses[i] = _Pulse(v, t, pul_durs[i])
            elif d.role == "mirror":
                gamma = d.delay.gamma
                if d.active_at(n_i) and len(mirror_hist[i]) >= gamma + 1:
                    v = mirror_response(mirror_hist[i], gamma, d.mirror_gain, d.mirror_invert)
                else:
                    v = 0.0
                pulses[i] = _Pulse(v, t, pul_durs[i])
            # listeners write nothing

        # read phase
        e_vec = np.array(
            [pulses[j].value if pulses[j].active_at(t) else 0.0 for j in range(m)]
        )
        sensed = {}
        for i in group:
            s = float(np.dot(G[i], e_vec))
            if chains[i] is not None:
                s = chains[i].apply(s)
            if noise is not None and devs[i].role != "mirror":
                s += noise.sample()
            sensed[i] = s

        # iterate phase
        for i in group:
            d = devs[i]
            n_i = tick_count[i]
            xw = sensed[i]
            xo = pulses[i].value if pulses[i].active_at(t) else 0.0
            rec[i]["steps"].append(n_i)
            rec[i]["times"].append(float(t))
            rec[i]["x"].append(x[i])
            rec[i]["xo"].append(xo)
            rec[i]["xw"].append(xw)
            if d.role == "mirror":
                mirror_hist[i].append(xw)
            elif d.role == "oscillator" and d.active_at(n_i):
                try:
                    x[i] = _osc_update(x[i], d.map.alpha, d.gains, xw, xo)
                except DivergenceError:
                    trace.diverged = True
                    trace.diverged_step = n_i
                    log.append((float(t), i, "diverged"))
                    diverged = True
            tick_count[i] += 1
            heapq.heappush(heap, (t + periods[i], i))

    for i, d in enumerate(devs):
        r = rec[i]
        trace.devices.append(
            DeviceRecord(
                device_id=i,
                role=d.role,
                steps=np.array(r["steps"], dtype=np.int64),
                times=np.array(r["times"]),
                x=np.array(r["x"]),
                xi_o=np.array(r["xo"]),
                xi_w=np.array(r["xw"]),
            )
        )
    trace.final_states = np.array(x)
    return trace


@dataclass
class CalibrationMedium:
    """Solo-device test channel for the self-gain calibration routine.

    Gains are the true (sign-dependent) fractions of the emitted voltage
    that return to the device's own sensing electrodes. emit_scale
    converts map units to volts so the additive noise keeps its physical
    size relative to the signal.
    """

    gain_pos: float = 0.13
    gain_neg: float = 0.03
    noise: NoiseModel | None = None
    emit_scale: float | None = None

    def scale_for(self, device: DeviceSpec) -> float:
        if self.emit_scale is not None:
            return self.emit_scale
        return device.k_dac * VOLTS_PER_COUNT


def calibrate_k1(device: DeviceSpec, medium: CalibrationMedium, cycles: int = 1000):
    """Estimate the device's self-signal gains by listening to itself.

    The device runs open loop (k2 = 0) while alone in the medium; the
    per-sign medians of sensed/emitted voltage ratios become k1_pos and
    k1_neg, which are stored back into the device's gains.
    """
    if medium.noise is not None:
        medium.noise.reset()
    scale = medium.scale_for(device)
    alpha = device.map.alpha
    x = device.x0
    ratios_pos, ratios_neg = [], []
    for _ in range(cycles):
        v_o = x * scale
        if v_o >= 0:
            v_w = medium.gain_pos * v_o
        else:
            v_w = medium.gain_neg * v_o
        if medium.noise is not None:
            v_w += medium.noise.sample()
        if abs(v_o) > 1e-9 * max(scale, 1.0):
            if v_o >= 0:
                ratios_pos.append(v_w / v_o)
            else:
                ratios_neg.append(v_w / v_o)
        x = x * (2.0 - alpha * x - alpha)
    if len(ratios_pos) < 3 or len(ratios_neg) < 3:
        raise CalibrationError(
            f"insufficient samples of one sign ({len(ratios_pos)} pos, "
            f"{len(ratios_neg)} neg); emissions may be one-sided or zero"
        )
    k1_pos = float(median(ratios_pos))
    k1_neg = float(median(ratios_neg))
    device.gains.k1_pos = k1_pos
    device.gains.k1_neg = k1_neg
    return k1_pos, k1_neg
