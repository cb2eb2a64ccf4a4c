"""Pure map operations for field-coupled oscillator devices.

Every update rule used anywhere in the toolkit lives here as a
side-effect-free function of floats, so the simulators and the analysis
code iterate exactly the same arithmetic. All state math is 64-bit
floating point.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

BLOWUP_BOUND = 1.0e6

STUDIED_ALPHA_BAND = (-1.0, 4.0)


class DivergenceError(ArithmeticError):
    """Raised when an update leaves the configured blow-up bound."""

    def __init__(self, value: float, context: str = ""):
        self.value = value
        msg = f"state diverged (value {value!r})"
        if context:
            msg += f" in {context}"
        super().__init__(msg)


@dataclass(frozen=True)
class MapParams:
    """Control parameter of the transformed map."""

    alpha: float

    def __post_init__(self):
        if not np.isfinite(self.alpha):
            raise ValueError("alpha must be finite")

    def in_studied_band(self) -> bool:
        lo, hi = STUDIED_ALPHA_BAND
        return lo <= self.alpha <= hi


@dataclass
class CouplingGains:
    """Feedback gains of one device.

    k1_pos and k1_neg weigh the device's own emitted signal when it is
    subtracted from the sensed field (separate values because the analog
    chain amplifies positive and negative excursions differently); k2
    scales the remaining water feedback.
    """

    k1_pos: float = 0.0
    k1_neg: float = 0.0
    k2: float = 0.0

    def __post_init__(self):
        if self.k1_pos < 0 or self.k1_neg < 0:
            raise ValueError("k1 gains must be non-negative")

    def k1_for(self, xi_o: float) -> float:
        return self.k1_pos if xi_o >= 0 else self.k1_neg


@dataclass
class DelayGains:
    """Gains of the one-step and two-step delayed terms plus the mirror delay."""

    k3: float = 0.0
    k4: float = 0.0
    gamma: int = 0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if not (np.isfinite(self.k3) and np.isfinite(self.k4)):
            raise ValueError("delay gains must be finite")


@dataclass
class OscState:
    """Map state plus a short history ring for delayed terms.

    The most recent history entry always equals x. The buffer length is
    fixed at construction: max(gamma, 2) + 1 entries.
    """

    x: float
    history: deque = field(repr=False, default=None)

    @classmethod
    def start(cls, x0: float, gamma: int = 0) -> "OscState":
        depth = max(gamma, 2) + 1
        h = deque([float(x0)] * depth, maxlen=depth)
        return cls(x=float(x0), history=h)

    def advance(self, x_new: float) -> None:
        self.x = float(x_new)
        self.history.append(self.x)

    def past(self, lag: int) -> float:
        """State lag steps ago; lag 0 is the current state."""
        if lag >= len(self.history):
            raise ValueError(f"history holds only {len(self.history)} entries")
        return self.history[-1 - lag]


def _check(value: float, context: str) -> float:
    if not (-BLOWUP_BOUND < value < BLOWUP_BOUND):
        raise DivergenceError(value, context)
    return value


def logistic_step(x: float, p: MapParams) -> float:
    """One step of the transformed map x(2 - alpha*x - alpha)."""
    return _check(x * (2.0 - p.alpha * x - p.alpha), "logistic_step")


def coupled_step(s, p: MapParams, g: CouplingGains, xi_w: float, xi_o: float) -> float:
    """One step of a device closing the loop through the water.

    The caller supplies the sensed field xi_w and the device's own
    emitted signal xi_o; the self term k1 * xi_o is removed before the
    residual field acts through k2. The sign of xi_o selects which k1
    applies.
    """
    x = s.x if isinstance(s, OscState) else float(s)
    k1 = g.k1_for(xi_o)
    return _check(
        logistic_step(x, p) + g.k2 * (xi_w - k1 * xi_o),
        "coupled_step",
    )


def multi_coupled_step(states, p: MapParams, G) -> np.ndarray:
    """Synchronous update of m devices coupled by the matrix G.

    The coupling sums are formed from the pre-update state vector, then
    every device updates at once.
    """
    x = np.asarray(states, dtype=np.float64)
    G = np.asarray(G, dtype=np.float64)
    m = x.shape[0]
    if G.shape != (m, m):
        raise ValueError(f"coupling matrix shape {G.shape} does not match {m} states")
    fields = G @ x
    out = x * (2.0 - p.alpha * x - p.alpha) + fields
    bad = ~(np.abs(out) < BLOWUP_BOUND)
    if bad.any():
        raise DivergenceError(float(out[bad][0]), "multi_coupled_step")
    return out


def pair_step(x: float, y: float, p: MapParams, k2: float) -> tuple[float, float]:
    """One step of two mutually coupled devices."""
    xn = _check(logistic_step(x, p) + k2 * y, "pair_step")
    yn = _check(logistic_step(y, p) + k2 * x, "pair_step")
    return xn, yn


def second_iterate_pair(x: float, y: float, p: MapParams, k2: float) -> tuple[float, float]:
    """Two steps of the coupled pair, by composing the one-step map twice."""
    x1, y1 = pair_step(x, y, p, k2)
    return pair_step(x1, y1, p, k2)


def delayed_step(s: OscState, p: MapParams, d: DelayGains) -> float:
    """One step of the map with one-step and two-step delayed feedback."""
    return _check(
        logistic_step(s.x, p) + d.k3 * s.past(1) + d.k4 * s.past(2),
        "delayed_step",
    )


def mirror_coupled_step(states, histories, p: MapParams, G, G_tilde, gamma: int) -> np.ndarray:
    """Synchronous swarm update with an additional delayed field.

    histories is an (m, L) array whose column -1 holds the current
    states; column -1 - gamma supplies the delayed states weighted by
    G_tilde.
    """
    x = np.asarray(states, dtype=np.float64)
    H = np.asarray(histories, dtype=np.float64)
    m = x.shape[0]
    G = np.asarray(G, dtype=np.float64)
    Gt = np.asarray(G_tilde, dtype=np.float64)
    if G.shape != (m, m) or Gt.shape != (m, m):
        raise ValueError("coupling matrices must be m x m")
    if H.shape[0] != m or H.shape[1] < gamma + 1:
        raise ValueError(f"histories must hold at least {gamma + 1} samples per device")
    delayed = H[:, -1 - gamma]
    out = x * (2.0 - p.alpha * x - p.alpha) + G @ x + Gt @ delayed
    bad = ~(np.abs(out) < BLOWUP_BOUND)
    if bad.any():
        raise DivergenceError(float(out[bad][0]), "mirror_coupled_step")
    return out
