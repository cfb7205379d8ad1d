"""Electron temperature from Fermi-Dirac broadening of a charge transition."""

from __future__ import annotations

import math

import numpy as np
from scipy import constants, stats
from scipy.optimize import least_squares

from .errors import FitError

K_B_MEV_PER_K = constants.k / constants.e * 1e3
DEVICE_LEVER_ARM = 0.0497  # meV/mV


def fermi_dirac(v, a, b):
    """1 / (exp(a (v - b)) + 1) with v in mV and a in 1/mV."""
    return 1.0 / (np.exp(a * (np.asarray(v, dtype=float) - b)) + 1.0)


def fit_fermi_dirac(v, signal) -> tuple[float, float]:
    """Logistic fit of a normalized transition; returns (a, b)."""
    v = np.asarray(v, dtype=float)
    s = np.asarray(signal, dtype=float)
    rho = stats.spearmanr(v, s).statistic
    if not abs(rho) > 0.8:
        raise FitError("signal is not monotonic across the sweep")
    order = np.argsort(v)
    v, s = v[order], s[order]
    b0 = float(v[np.argmin(np.abs(s - 0.5))])
    width = float(np.ptp(v)) / 10.0
    a0 = math.copysign(4.0 / width, -rho)
    sol = least_squares(lambda x: fermi_dirac(v, x[0], x[1]) - s, [a0, b0], xtol=1e-15, ftol=1e-15, gtol=1e-15)
    if not sol.success:
        raise FitError("Fermi-Dirac fit did not converge")
    return float(sol.x[0]), float(sol.x[1])


def electron_temperature(a: float, lever_arm: float = DEVICE_LEVER_ARM) -> float:
    """T_e in kelvin from the logistic slope ``a`` (1/mV) and the lever arm
    (meV/mV)."""
    return lever_arm / (K_B_MEV_PER_K * abs(a))


def te_power_law(t_mixing, t_sat, k):
    """(T_S^k + T_mix^k)^(1/k)."""
    t = np.asarray(t_mixing, dtype=float)
    return (t_sat**k + t**k) ** (1.0 / k)


def fit_te_power_law(t_mixing, t_e) -> tuple[float, float]:
    """Fit saturation temperature and exponent; same unit in and out."""
    tm = np.asarray(t_mixing, dtype=float)
    te = np.asarray(t_e, dtype=float)
    ts0 = float(te[np.argmin(tm)])
    best = None
    for k0 in np.linspace(1.0, 8.0, 29):
        r = np.log(te_power_law(tm, ts0, k0)) - np.log(te)
        if best is None or r @ r < best[0]:
            best = (float(r @ r), k0)
    sol = least_squares(
        lambda x: np.log(te_power_law(tm, x[0], x[1])) - np.log(te),
        [ts0, best[1]],
        bounds=([1e-12, 0.1], [np.inf, 50.0]),
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
    )
    return float(sol.x[0]), float(sol.x[1])
