"""Two-level dynamics of the S-T0 qubit.

H = (J/2) sigma_z + (dBz/2) sigma_x with J and dBz as frequencies in MHz.
The Bloch z axis points to |S> (z = +1) and |T0> (z = -1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spin_model import SpinLabel, SpinOutcomeModel, visibility_probabilities
from .units import MHZ_NS, MHZ_US


@dataclass(frozen=True)
class HamiltonianParams:
    j_exchange: float = 0.0
    delta_bz: float = 30.0

    def __post_init__(self):
        if self.j_exchange < 0:
            raise ValueError("j_exchange must be non-negative")

    @property
    def omega(self) -> float:
        return math.hypot(self.j_exchange, self.delta_bz)


@dataclass(frozen=True)
class BlochVector:
    x: float
    y: float
    z: float

    @classmethod
    def singlet(cls) -> BlochVector:
        return cls(0.0, 0.0, 1.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @property
    def norm(self) -> float:
        return math.sqrt(self.x**2 + self.y**2 + self.z**2)

    @property
    def p_t0(self) -> float:
        return (1.0 - self.z) / 2.0


@dataclass(frozen=True)
class RabiDriveParams:
    f_drive: float
    f_rabi: float = 6.05
    t_rabi_decay: float = 1.71
    duration: float = 1.0

    def __post_init__(self):
        if self.f_rabi <= 0 or self.t_rabi_decay <= 0:
            raise ValueError("f_rabi and t_rabi_decay must be positive")


def rotate(vec, axis, angle):
    """Rodrigues rotation of Bloch vectors ``vec`` (..., 3) about unit ``axis``
    (..., 3) by ``angle`` radians; all arguments broadcast."""
    v = np.asarray(vec, dtype=float)
    n = np.asarray(axis, dtype=float)
    a = np.asarray(angle, dtype=float)[..., None]
    cos, sin = np.cos(a), np.sin(a)
    n_dot_v = np.sum(n * v, axis=-1, keepdims=True)
    return v * cos + np.cross(n, v) * sin + n * n_dot_v * (1.0 - cos)


def evolve(state: BlochVector, params: HamiltonianParams, t: float) -> BlochVector:
    """Free evolution for ``t`` ns: rotation about (dBz, 0, J)/Omega by
    2*pi*Omega*t."""
    if t < 0:
        raise ValueError("t must be non-negative")
    omega = params.omega
    if omega == 0.0 or t == 0.0:
        return state
    axis = np.array([params.delta_bz, 0.0, params.j_exchange]) / omega
    out = rotate(state.as_array(), axis, 2.0 * math.pi * omega * t * MHZ_NS)
    return BlochVector(*map(float, out))


def evolve_many(vec, j_exchange, delta_bz, t_ns):
    """Vectorized ``evolve`` on raw arrays; ``vec`` has shape (..., 3)."""
    j = np.asarray(j_exchange, dtype=float)
    d = np.asarray(delta_bz, dtype=float)
    omega = np.hypot(j, d)
    safe = np.where(omega > 0, omega, 1.0)
    axis = np.stack(np.broadcast_arrays(d / safe, np.zeros_like(d / safe), j / safe), axis=-1)
    angle = 2.0 * math.pi * omega * np.asarray(t_ns, dtype=float) * MHZ_NS
    return rotate(vec, axis, angle)


def larmor_flip_prob(delta_bz, tau):
    """sin^2(pi dBz tau) for dBz in MHz and tau in ns."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("tau must be non-negative")
    p = np.sin(math.pi * np.asarray(delta_bz, dtype=float) * tau * MHZ_NS) ** 2
    return float(p) if p.ndim == 0 else p


def exchange_flip_prob(j_exchange, delta_bz, t_e):
    """Return probability for the symmetric exchange sequence.

    S is brought to the equator by an ideal Larmor pi/2, evolves under
    (J, dBz) for ``t_e`` ns, and is mapped back by a second pi/2.
    """
    start = np.array([0.0, 0.0, 1.0])
    quarter = np.array([1.0, 0.0, 0.0])
    v = rotate(start, quarter, math.pi / 2)
    v = evolve_many(v, j_exchange, delta_bz, t_e)
    v = rotate(v, quarter, math.pi / 2)
    p = (1.0 - v[..., 2]) / 2.0
    return float(p) if np.ndim(p) == 0 else p


def rabi_prob(drive: RabiDriveParams, delta_bz, t):
    """Detuned Rabi triplet probability with a Gaussian decay envelope.

    ``t`` in us. The envelope relaxes the oscillation toward half of the
    chevron amplitude f_R^2 / (f_R^2 + delta^2).
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    delta = drive.f_drive - np.asarray(delta_bz, dtype=float)
    omega_sq = drive.f_rabi**2 + delta**2
    amp = drive.f_rabi**2 / omega_sq
    env = np.exp(-((t / drive.t_rabi_decay) ** 2))
    osc = np.sin(math.pi * np.sqrt(omega_sq) * t * MHZ_US) ** 2
    p = amp * osc * env + (1.0 - env) / 2.0 * amp
    return float(p) if p.ndim == 0 else p


def sample_outcome(p_t0, model: SpinOutcomeModel, rng: np.random.Generator, size=None):
    """Draw final spin labels from the four-state error model with
    ``P_flip = p_t0``. Returns a ``SpinLabel`` for scalar input, otherwise an
    integer array of label values."""
    p = np.asarray(p_t0, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p_t0 must lie in [0, 1]")
    if size is not None:
        p = np.broadcast_to(p, size)
    probs = np.stack(np.broadcast_arrays(*visibility_probabilities(p, model)), axis=-1)
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(p.shape)[..., None]
    labels = np.minimum(np.sum(u >= cdf[..., :-1], axis=-1), 3)
    if labels.ndim == 0:
        return SpinLabel(int(labels))
    return labels
