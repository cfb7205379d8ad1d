"""Larmor-oscillation visibility under the four-state error model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from ..qubit import larmor_flip_prob
from ..spin_model import SpinOutcomeModel, detection_from_flip, measurement_fidelities
from .errors import FitError


def detection_probability(tau, delta_bz, model: SpinOutcomeModel):
    """P_D at Larmor evolution time ``tau`` (ns) for gradient ``delta_bz`` (MHz)."""
    return detection_from_flip(larmor_flip_prob(delta_bz, tau), model)


def oscillation_visibility(model: SpinOutcomeModel) -> float:
    """max - min of P_D over a full Larmor period (P_D is affine in P_flip)."""
    return float(abs(detection_from_flip(1.0, model) - detection_from_flip(0.0, model)))


@dataclass(frozen=True)
class VisibilityFit:
    alpha_s: float
    beta_t: float
    f_s: float
    f_t0: float
    residual_norm: float
    model: SpinOutcomeModel

    @property
    def visibility(self) -> float:
        return self.f_s + self.f_t0 - 1.0


def fit_visibility_model(
    tau,
    p1,
    e_t: float,
    e_n: float,
    gamma: float,
    delta_bz: float,
    shots=None,
) -> VisibilityFit:
    """Least-squares (alpha_S, beta_T) with the detection errors, relaxation
    and gradient held fixed. ``shots`` (per point) enables binomial weights."""
    tau = np.asarray(tau, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    if tau.size < 4:
        raise FitError("need at least four points")
    span = tau.max() - tau.min()
    if span * delta_bz * 1e-3 < 2.0:
        raise FitError("data must span at least two oscillation periods")
    p_flip = larmor_flip_prob(delta_bz, tau)
    if shots is None:
        weight = np.ones_like(p1)
    else:
        var = np.clip(p1 * (1 - p1), 1e-4, None) / np.asarray(shots, dtype=float)
        weight = 1.0 / np.sqrt(var)

    def build(x):
        return SpinOutcomeModel(
            beta_s=1.0 - x[1], beta_t=x[1], alpha_s=x[0], gamma=gamma, e_t=e_t, e_n=e_n
        )

    def resid(x):
        return (detection_from_flip(p_flip, build(x)) - p1) * weight

    sol = least_squares(resid, x0=[0.005, 0.005], bounds=([0, 0], [0.5, 0.5]), xtol=1e-14, ftol=1e-14, gtol=1e-14)
    if not sol.success:
        raise FitError(f"visibility fit did not converge (residual norm {np.linalg.norm(sol.fun):.3g})")
    model = build(sol.x)
    f_s, f_t0 = measurement_fidelities(model)
    return VisibilityFit(float(sol.x[0]), float(sol.x[1]), f_s, f_t0, float(np.linalg.norm(sol.fun)), model)
