"""Gaussian-damped oscillation fits, dephasing conversions and Q factors.

Model: y = B + A cos(2 pi f t + phi) exp(-(t / T)^2), f in MHz. Times are in
ns unless ``time_unit="us"`` is given. The decay enters as the rate
lambda = 1/T^2 >= 0 so an undamped signal sits on the boundary rather than
at infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .errors import FitError

_UNITS = {"ns": 1e-3, "us": 1.0}


def gaussian_decay(t, amplitude, frequency, phase, offset, decay_time, time_unit="ns"):
    scale = _UNITS[time_unit]
    t = np.asarray(t, dtype=float)
    env = np.ones_like(t) if math.isinf(decay_time) else np.exp(-((t / decay_time) ** 2))
    return offset + amplitude * np.cos(2 * math.pi * frequency * t * scale + phase) * env


@dataclass(frozen=True)
class DecayFit:
    amplitude: float
    frequency: float  # MHz
    phase: float
    offset: float
    decay_time: float  # same unit as the input times; inf when unbounded
    stderr: dict
    residual_norm: float
    time_unit: str = "ns"

    @property
    def visibility(self) -> float:
        return 2.0 * self.amplitude

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.decay_time)

    def __call__(self, t):
        return gaussian_decay(
            t, self.amplitude, self.frequency, self.phase, self.offset, self.decay_time, self.time_unit
        )


def _linear_solve(t, y, f, lam, scale):
    env = np.exp(-lam * t**2)
    w = 2 * math.pi * f * t * scale
    basis = np.column_stack([np.ones_like(t), env * np.cos(w), env * np.sin(w)])
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    r = basis @ coef - y
    return coef, float(r @ r)


def fit_gaussian_decay(t, y, time_unit: str = "ns", f_bounds=None) -> DecayFit:
    """Deterministic fit: dense grid over (frequency, decay rate) with the
    linear parameters solved exactly, then bounded nonlinear least squares.

    Raises FitError when the data cover less than half a period.
    """
    scale = _UNITS[time_unit]
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = np.isfinite(y)
    t, y = t[ok], y[ok]
    if t.size < 6:
        raise FitError("need at least six points")
    span = float(t.max() - t.min())
    dt = float(np.min(np.diff(np.unique(t))))
    f_lo = 0.5 / (span * scale)
    f_hi = 0.5 / (dt * scale)
    if f_bounds is not None:
        f_lo, f_hi = max(f_lo, f_bounds[0]), min(f_hi, f_bounds[1])
    f_grid = np.linspace(f_lo, f_hi, max(200, int(8 * (f_hi - f_lo) * span * scale)))
    lam_grid = np.concatenate([[0.0], 1.0 / (span * np.geomspace(0.05, 3.0, 16)) ** 2])

    best = (math.inf, None)
    y_c = y - y.mean()
    # periodogram on the undamped basis narrows the frequency search
    power = np.array([_linear_solve(t, y_c, f, 0.0, scale)[1] for f in f_grid])
    for f in f_grid[np.argsort(power)[:5]]:
        for lam in lam_grid:
            coef, rss = _linear_solve(t, y, f, lam, scale)
            if rss < best[0]:
                best = (rss, (coef, f, lam))
    coef, f0, lam0 = best[1]
    x0 = np.array([coef[0], coef[1], coef[2], f0, lam0 * span**2])

    def model(x):
        b, c1, c2, f, lam_n = x
        env = np.exp(-(lam_n / span**2) * t**2)
        w = 2 * math.pi * f * t * scale
        return b + env * (c1 * np.cos(w) + c2 * np.sin(w))

    sol = least_squares(
        lambda x: model(x) - y,
        x0,
        bounds=([-np.inf, -np.inf, -np.inf, 0.0, 0.0], [np.inf, np.inf, np.inf, np.inf, np.inf]),
        x_scale=[1.0, 1.0, 1.0, max(f0, 1e-6), 1.0],
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
        max_nfev=5000,
    )
    b, c1, c2, f, lam_n = sol.x
    if f * span * scale < 0.5:
        raise FitError("frequency unidentifiable: data span below half a period")
    amp = math.hypot(c1, c2)
    phase = math.atan2(-c2, c1)
    lam = lam_n / span**2
    decay = math.inf if lam <= 1.0 / (10.0 * span) ** 2 else 1.0 / math.sqrt(lam)

    dof = max(1, t.size - 5)
    s2 = float(sol.fun @ sol.fun) / dof
    try:
        cov = np.linalg.inv(sol.jac.T @ sol.jac) * s2
        err = np.sqrt(np.clip(np.diag(cov), 0, None))
    except np.linalg.LinAlgError:
        err = np.full(5, np.nan)
    d_decay = math.nan if math.isinf(decay) else 0.5 * decay * err[4] / max(lam_n, 1e-300)
    stderr = {"offset": float(err[0]), "frequency": float(err[3]), "decay_time": float(d_decay)}
    return DecayFit(
        amplitude=amp,
        frequency=float(f),
        phase=phase,
        offset=float(b),
        decay_time=decay,
        stderr=stderr,
        residual_norm=float(np.linalg.norm(sol.fun)),
        time_unit=time_unit,
    )


def sigma_from_t2(t2_star: float) -> float:
    """Gaussian dephasing: sigma (MHz) = 1 / (sqrt(2) pi T2*) with T2* in ns."""
    if t2_star <= 0:
        raise ValueError("t2_star must be positive")
    return 1.0 / (math.sqrt(2.0) * math.pi * t2_star * 1e-3)


def t2_from_sigma(sigma: float) -> float:
    """Inverse of ``sigma_from_t2``; returns ns."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return 1.0 / (math.sqrt(2.0) * math.pi * sigma) * 1e3


@dataclass(frozen=True)
class QEntry:
    key: object
    frequency: float  # MHz
    decay_time: float  # ns
    q: float

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.q)


def fit_exchange_q(data, time_unit: str = "ns") -> list[QEntry]:
    """Q = f * T_decay per exchange setting.

    ``data`` maps a setting (J in MHz, or a pulse amplitude) to (t, P1); a
    bare (t, P1) pair is treated as a single setting keyed ``None``.
    """
    if isinstance(data, tuple) and len(data) == 2 and not isinstance(data[0], dict):
        data = {None: data}
    scale = _UNITS[time_unit]
    out = []
    for key, (t, y) in data.items():
        fit = fit_gaussian_decay(t, y, time_unit=time_unit)
        q = math.inf if fit.unbounded else fit.frequency * fit.decay_time * scale
        out.append(QEntry(key, fit.frequency, fit.decay_time, q))
    return out
