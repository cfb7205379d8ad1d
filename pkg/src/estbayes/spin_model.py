"""Error-channel model for one initialize / manipulate / detect cycle.

Four final spin states are tracked (S, T0, T+, T-). Only S and T0 take part
in the coherent dynamics; the polarized triplets are reached by false
initialization only and relax to S with the same probability as T0.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .units import T1_US


class SpinLabel(enum.IntEnum):
    S = 0
    T0 = 1
    TPLUS = 2
    TMINUS = 3

    @property
    def is_triplet(self) -> bool:
        return self is not SpinLabel.S


@dataclass(frozen=True)
class SpinOutcomeModel:
    """Initialization, relaxation, thermal-tunneling and detection errors.

    Attributes:
        beta_s: probability of initializing to S.
        beta_t: probability of initializing to a triplet, split evenly over
            T0, T+ and T-.
        alpha_s: probability that an S electron tunnels out thermally.
        gamma: probability that a triplet relaxes to S before detection.
        e_t: probability of missing a tunneling event.
        e_n: probability of detecting a tunneling event that did not happen.
    """

    beta_s: float = 1.0
    beta_t: float = 0.0
    alpha_s: float = 0.0
    gamma: float = 0.0
    e_t: float = 0.0
    e_n: float = 0.0

    def __post_init__(self):
        for name in ("beta_s", "beta_t", "alpha_s", "gamma", "e_t", "e_n"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value} outside [0, 1]")
        if abs(self.beta_s + self.beta_t - 1.0) > 1e-12:
            raise ValueError(
                f"beta_s + beta_t must equal 1 (got {self.beta_s + self.beta_t!r})"
            )

    @classmethod
    def ideal(cls) -> SpinOutcomeModel:
        return cls()

    @classmethod
    def device(cls, beta_t: float = 0.0) -> SpinOutcomeModel:
        """Error budget of the heralded-mode device (E_T 1.4 %, E_N 0.7 %,
        alpha_S 0.6 %, gamma 0.3 %)."""
        return cls(
            beta_s=1.0 - beta_t,
            beta_t=beta_t,
            alpha_s=0.006,
            gamma=0.003,
            e_t=0.014,
            e_n=0.007,
        )

    def with_init_error(self, beta_t: float) -> SpinOutcomeModel:
        return replace(self, beta_s=1.0 - beta_t, beta_t=beta_t)

    def with_detection(self, e_t: float, e_n: float) -> SpinOutcomeModel:
        return replace(self, e_t=e_t, e_n=e_n)


def relaxation_probability(tunnel_out_rate_mhz: float = 1.0, t1_us: float = T1_US) -> float:
    """gamma ~ tau_out / T1 with tau_out the mean tunnel-out time."""
    return (1.0 / tunnel_out_rate_mhz) / t1_us


def visibility_probabilities(p_flip, model: SpinOutcomeModel):
    """Final-state probabilities (P_S, P_T0, P_T+, P_T-) after manipulation.

    ``p_flip`` is the ideal S<->T0 flip probability of the manipulation pulse
    and may be an array. The bracket of the T0-initialized branch is read as
    ``p_flip + (1 - p_flip) * gamma`` so that the four terms sum to one.
    """
    p = np.asarray(p_flip, dtype=float)
    bs, bt, g = model.beta_s, model.beta_t, model.gamma
    p_s = bs * (1.0 - p + p * g) + bt / 3.0 * (p + (1.0 - p) * g) + 2.0 * bt / 3.0 * g
    p_t0 = bs * p * (1.0 - g) + bt / 3.0 * (1.0 - p) * (1.0 - g)
    p_tpm = np.broadcast_to(bt / 3.0 * (1.0 - g), p.shape).astype(float)
    if p.ndim == 0:
        return float(p_s), float(p_t0), float(p_tpm), float(p_tpm)
    return p_s, p_t0, p_tpm, p_tpm.copy()


def detection_given_label(label, model: SpinOutcomeModel):
    """Probability of registering a tunneling event for a known final state.

    Works elementwise on arrays of integer labels. Terms in E_T * E_N are
    dropped, as in the combined detection formula.
    """
    lab = np.asarray(label)
    p_triplet = 1.0 - model.e_t
    p_singlet = model.e_n + model.alpha_s * (1.0 - model.e_t)
    out = np.where(lab == SpinLabel.S, p_singlet, p_triplet)
    return float(out) if out.ndim == 0 else out


def detection_from_flip(p_flip, model: SpinOutcomeModel):
    """Combined detection probability P_D for a given ideal flip probability."""
    p_s, p_t0, p_tp, p_tm = visibility_probabilities(p_flip, model)
    return (p_t0 + p_tp + p_tm) * (1.0 - model.e_t) + p_s * model.e_n + (
        model.alpha_s * p_s * (1.0 - model.e_t)
    )


def measurement_fidelities(model: SpinOutcomeModel) -> tuple[float, float]:
    """(F_S, F_T0): 1 - P_D for no flip and P_D for a full flip."""
    f_s = 1.0 - float(detection_from_flip(0.0, model))
    f_t0 = float(detection_from_flip(1.0, model))
    return f_s, f_t0
