"""Charge-sensor SNR scaling and the minimum integration time."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FitError


@dataclass(frozen=True)
class SNRFit:
    slope: float  # SNR^2 per ns
    intercept: float
    tau_min: float  # ns

    @property
    def sensitivity(self) -> float:
        # a noisy intercept can push tau_min to zero or below, where the
        # sensitivity has no meaning
        return charge_sensitivity(self.tau_min) if self.tau_min > 0 else math.nan


def charge_sensitivity(tau_min_ns: float) -> float:
    """e sqrt(tau_min), in units of e / sqrt(Hz)."""
    if tau_min_ns <= 0:
        raise ValueError(f"tau_min must be positive, got {tau_min_ns}")
    return math.sqrt(tau_min_ns * 1e-9)


def fit_snr(t_int, snr) -> SNRFit:
    """Straight line through SNR^2 versus integration time (free intercept);
    tau_min is where the line reaches SNR^2 = 1."""
    t = np.asarray(t_int, dtype=float)
    y = np.asarray(snr, dtype=float) ** 2
    if t.size < 3:
        raise FitError("need at least three points")
    slope, intercept = np.polyfit(t, y, 1)
    if slope <= 0:
        raise FitError("SNR^2 does not grow with integration time")
    return SNRFit(float(slope), float(intercept), float((1.0 - intercept) / slope))
