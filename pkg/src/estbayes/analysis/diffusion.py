"""Diffusivity of the gradient from increment variance versus lag."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..units import MHZ2_TO_KHZ2
from .errors import FitError


@dataclass(frozen=True)
class DiffusivityFit:
    diffusivity: float  # kHz^2/us
    lags: np.ndarray  # us
    variances: np.ndarray  # MHz^2


def increment_variance(series, lags) -> np.ndarray:
    """Variance of x[i + L] - x[i], pooled over rows, for each lag L (in
    samples)."""
    x = np.atleast_2d(np.asarray(series, dtype=float))
    out = np.empty(len(lags))
    for j, lag in enumerate(lags):
        d = (x[:, lag:] - x[:, :-lag]).ravel()
        out[j] = d.var()
    return out


def fit_diffusivity(series, dt: float, min_lag: int = 1, max_lag: int | None = None) -> DiffusivityFit:
    """Fit Var[increment] = D * lag through the origin.

    ``series`` holds equally spaced samples (MHz), one row per trajectory;
    ``dt`` is the spacing in us. Lags are in samples; the fit weights each lag
    by 1/lag, which reduces to D = sum(var) / sum(lag).
    """
    x = np.atleast_2d(np.asarray(series, dtype=float))
    n = x.shape[1]
    if x.size < 1000:
        raise FitError("need at least 1e3 samples")
    if max_lag is None:
        max_lag = max(min_lag, n // 10)
    lags = np.arange(min_lag, min(max_lag, n - 1) + 1)
    if lags.size == 0:
        raise FitError("no usable lags")
    var = increment_variance(x, lags)
    lag_us = lags * dt
    d_mhz2 = float(var.sum() / lag_us.sum())
    return DiffusivityFit(d_mhz2 * MHZ2_TO_KHZ2, lag_us, var)
