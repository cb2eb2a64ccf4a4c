"""The water as a coupling channel.

Builds coupling weights (random per the studied protocol, or from dipole
geometry through a power law), superposes emissions into sensed fields
with optional filtering and bounded asymmetric noise, and implements the
passive mirror's delayed response.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_SPREAD = 3.0e-3


@dataclass
class CouplingMatrix:
    """m x m matrix of sensing weights; entry (i, j) weighs emitter j at receiver i."""

    m: int
    g: np.ndarray

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=np.float64)
        if self.g.shape != (self.m, self.m):
            raise ValueError(f"expected shape ({self.m}, {self.m}), got {self.g.shape}")
        if not np.all(np.isfinite(self.g)):
            raise ValueError("coupling entries must be finite")
        if self.m < 1:
            raise ValueError("need at least one device")


def sample_couplings(m, e, rng, spread=DEFAULT_SPREAD, include_self=False):
    """Random coupling weights around the offset e.

    One weight is drawn per emitter, g_j = e - U with U uniform on
    [0, spread], and every receiver senses emitter j with that same
    weight. The diagonal is zeroed unless include_self is set (a device
    that has not calibrated its self term away senses its own emission
    like any other).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    u = rng.uniform(0.0, spread, size=m)
    row = e - u
    G = np.tile(row, (m, 1))
    if not include_self:
        np.fill_diagonal(G, 0.0)
    if m == 1 and not include_self:
        G = np.zeros((1, 1))
    return CouplingMatrix(m=m, g=G)


@dataclass(frozen=True)
class DipolePose:
    position: tuple
    orientation: tuple = (0.0, 0.0, 1.0)
    dipole_length: float = 0.05

    def __post_init__(self):
        p = np.asarray(self.position, dtype=np.float64)
        o = np.asarray(self.orientation, dtype=np.float64)
        if p.shape != (3,) or o.shape != (3,):
            raise ValueError("position and orientation must be 3-vectors")
        n = float(np.linalg.norm(o))
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"orientation must have unit norm, got {n}")
        if self.dipole_length <= 0:
            raise ValueError("dipole_length must be positive")

    def pos(self) -> np.ndarray:
        return np.asarray(self.position, dtype=np.float64)


def pair_gain(a: DipolePose, b: DipolePose, decay_exponent: float, ref_gain: float) -> float:
    """Power-law gain between two poses, normalized to ref_gain at one dipole length.

    The normalizing length is the mean of the two dipole lengths so the
    result is symmetric in its arguments.
    """
    d = float(np.linalg.norm(a.pos() - b.pos()))
    if d <= 0:
        raise ValueError("coincident poses")
    L = 0.5 * (a.dipole_length + b.dipole_length)
    return ref_gain * (d / L) ** (-decay_exponent)


def coupling_from_geometry(poses, decay_exponent, ref_gain):
    """Coupling matrix from dipole poses via the power-law decay model."""
    m = len(poses)
    if m < 1:
        raise ValueError("need at least one pose")
    G = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            gij = pair_gain(poses[i], poses[j], decay_exponent, ref_gain)
            G[i, j] = gij
            G[j, i] = gij
    return CouplingMatrix(m=m, g=G)


def fit_decay_exponent(distances, gains) -> float:
    """Least-squares slope of log gain against log distance, negated.

    Used to calibrate the geometry model against measured decay data.
    """
    d = np.log(np.asarray(distances, dtype=np.float64))
    v = np.log(np.asarray(gains, dtype=np.float64))
    if d.shape != v.shape or d.size < 2:
        raise ValueError("need matching distance/gain arrays of length >= 2")
    slope = np.polyfit(d, v, 1)[0]
    return float(-slope)


@dataclass
class NoiseModel:
    """Bounded asymmetric uniform noise riding on every sensed sample.

    Samples lie in [bias - amplitude_neg, bias + amplitude_pos]. The
    stream is owned by one simulation run; reset() rewinds it.
    """

    amplitude_pos: float = 0.0
    amplitude_neg: float = 0.0
    bias: float = 0.0
    seed: int = 0
    _rng: np.random.Generator = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.amplitude_pos < 0 or self.amplitude_neg < 0:
            raise ValueError("noise amplitudes must be non-negative")

    def reset(self):
        self._rng = np.random.default_rng(self.seed)

    def sample(self) -> float:
        if self._rng is None:
            self.reset()
        return self.bias + self._rng.uniform(-self.amplitude_neg, self.amplitude_pos)

    def sample_vec(self, n: int) -> np.ndarray:
        if self._rng is None:
            self.reset()
        return self.bias + self._rng.uniform(-self.amplitude_neg, self.amplitude_pos, size=n)

    @property
    def span(self) -> float:
        return self.amplitude_pos + self.amplitude_neg


class SensingChain:
    """Gain plus optional single-pole high-pass applied to the sensed sum.

    With no cutoff the chain is a pure gain. The filter keeps per-channel
    state, so each receiver gets its own fresh() copy.
    """

    def __init__(self, gain: float = 1.0, highpass_cutoff: float | None = None,
                 dt: float | None = None):
        if highpass_cutoff is not None:
            if highpass_cutoff <= 0:
                raise ValueError("cutoff must be positive")
            if dt is None or dt <= 0:
                raise ValueError("a sample period dt is required with a cutoff")
        self.gain = gain
        self.highpass_cutoff = highpass_cutoff
        self.dt = dt
        self._prev_in = 0.0
        self._prev_out = 0.0

    def fresh(self) -> "SensingChain":
        return SensingChain(self.gain, self.highpass_cutoff, self.dt)

    def apply(self, value: float) -> float:
        if self.highpass_cutoff is None:
            return self.gain * value
        a = 1.0 / (1.0 + 2.0 * math.pi * self.highpass_cutoff * self.dt)
        y = a * (self._prev_out + value - self._prev_in)
        self._prev_in = value
        self._prev_out = y
        return self.gain * y


def superpose(G_row, emissions, chain: SensingChain | None = None,
              noise: NoiseModel | None = None) -> float:
    """Sensed field at one receiver: weighted sum, chain, noise, in that order."""
    row = np.asarray(G_row, dtype=np.float64)
    em = np.asarray(emissions, dtype=np.float64)
    if row.shape != em.shape:
        raise ValueError("weight row and emission vector differ in length")
    s = float(np.dot(row, em))
    if chain is not None:
        s = chain.apply(s)
    if noise is not None:
        s += noise.sample()
    return s


def mirror_response(history, gamma: int, gain: float = 1.0, invert: bool = False) -> float:
    """Replay of the stored common signal from gamma steps back."""
    if len(history) < gamma + 1:
        raise ValueError(
            f"history holds {len(history)} samples, need {gamma + 1} for delay {gamma}"
        )
    v = history[-1 - gamma]
    return (-gain if invert else gain) * v
