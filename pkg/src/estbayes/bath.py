"""Drifting nuclear gradient dBz(t): Wiener process with optional mean
reversion, reflected into the estimator band."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from .units import GRID_F_MAX_MHZ, GRID_F_MIN_MHZ, KHZ2_TO_MHZ2, DEVICE_DIFFUSIVITY_KHZ2_US


@dataclass(frozen=True)
class BathConfig:
    """Parameters of the gradient drift.

    Attributes:
        diffusivity: increment variance rate in kHz^2/us.
        mean: ensemble center in MHz.
        reversion_rate: Ornstein-Uhlenbeck pull toward ``mean`` in 1/us.
        bounds: reflecting bounds in MHz.
    """

    diffusivity: float = DEVICE_DIFFUSIVITY_KHZ2_US
    mean: float = 30.0
    reversion_rate: float = 0.0
    bounds: tuple[float, float] = (GRID_F_MIN_MHZ, GRID_F_MAX_MHZ)

    def __post_init__(self):
        if self.diffusivity < 0:
            raise ValueError("diffusivity must be non-negative")
        if not self.bounds[0] < self.bounds[1]:
            raise ValueError("bounds must be ordered")
        if self.reversion_rate < 0:
            raise ValueError("reversion_rate must be non-negative")

    @property
    def diffusivity_mhz2(self) -> float:
        return self.diffusivity * KHZ2_TO_MHZ2

    def with_stationary_sigma(self, sigma: float) -> BathConfig:
        """Set the reversion rate so the stationary std equals ``sigma`` MHz."""
        return replace(self, reversion_rate=stationary_reversion_rate(self.diffusivity, sigma))


@dataclass(frozen=True)
class BathState:
    delta_bz: float
    elapsed: float = 0.0


def stationary_reversion_rate(diffusivity: float, sigma: float) -> float:
    """OU rate theta with stationary variance D / (2 theta) = sigma^2."""
    if not sigma > 0:
        raise ValueError(f"stationary sigma must be positive, got {sigma}")
    return diffusivity * KHZ2_TO_MHZ2 / (2.0 * sigma**2)


def reflect(x, lo: float, hi: float):
    """Fold values back into [lo, hi] by mirror reflection at both walls."""
    width = hi - lo
    y = np.mod(np.asarray(x, dtype=float) - lo, 2.0 * width)
    y = np.where(y > width, 2.0 * width - y, y) + lo
    return float(y) if y.ndim == 0 else y


def step_values(delta_bz, dt, cfg: BathConfig, rng: np.random.Generator):
    """Advance an array of gradients by ``dt`` us (scalar or per element)."""
    x = np.asarray(delta_bz, dtype=float)
    dt = np.broadcast_to(np.asarray(dt, dtype=float), x.shape)
    if np.any(dt <= 0):
        raise ValueError("dt must be positive")
    drift = -cfg.reversion_rate * (x - cfg.mean) * dt
    if cfg.diffusivity > 0:
        noise = rng.standard_normal(x.shape) * np.sqrt(cfg.diffusivity_mhz2 * dt)
    else:
        noise = 0.0
    return reflect(x + drift + noise, *cfg.bounds)


def step(state: BathState, dt: float, cfg: BathConfig, rng: np.random.Generator) -> BathState:
    value = step_values(state.delta_bz, dt, cfg, rng)
    return BathState(float(value), state.elapsed + dt)


def trajectory(
    start, times, cfg: BathConfig, rng: np.random.Generator
) -> np.ndarray:
    """Sample dBz at increasing ``times`` (us, starting at 0) for every entry
    of ``start``; returns shape (len(start), len(times))."""
    x = np.atleast_1d(np.asarray(start, dtype=float)).copy()
    times = np.asarray(times, dtype=float)
    out = np.empty((x.size, times.size))
    prev = 0.0
    for i, t in enumerate(times):
        if t > prev:
            x = step_values(x, t - prev, cfg, rng)
        out[:, i] = x
        prev = t
    return out


def ensemble_sample(cfg: BathConfig, sigma_ensemble: float, rng: np.random.Generator, size=None):
    """Draw dBz from N(mean, sigma^2) truncated to the bath bounds."""
    if sigma_ensemble <= 0:
        raise ValueError("sigma_ensemble must be positive")
    lo, hi = cfg.bounds
    a = (lo - cfg.mean) / sigma_ensemble
    b = (hi - cfg.mean) / sigma_ensemble
    draw = stats.truncnorm.rvs(a, b, loc=cfg.mean, scale=sigma_ensemble, size=size, random_state=rng)
    draw = np.clip(draw, lo, hi)
    return float(draw) if np.ndim(draw) == 0 else draw
