"""Curve fits and analytic fidelity models."""

from ..spin_model import (
    SpinOutcomeModel,
    detection_from_flip,
    measurement_fidelities,
    visibility_probabilities,
)
from .decay import (
    DecayFit,
    QEntry,
    fit_exchange_q,
    fit_gaussian_decay,
    gaussian_decay,
    sigma_from_t2,
    t2_from_sigma,
)
from .diffusion import DiffusivityFit, fit_diffusivity, increment_variance
from .errors import FitError
from .rb import (
    CLIFFORDS,
    GST_FIDUCIALS,
    GST_GERMS,
    RBResult,
    RBTable,
    fit_rb,
    irb_fidelity,
    pi_pulse_fidelity_limit,
    rb_simulate,
)
from .sensor import SNRFit, charge_sensitivity, fit_snr
from .thermometry import (
    electron_temperature,
    fermi_dirac,
    fit_fermi_dirac,
    fit_te_power_law,
    te_power_law,
)
from .visibility import VisibilityFit, detection_probability, fit_visibility_model, oscillation_visibility

__all__ = [name for name in dir() if not name.startswith("_")]
