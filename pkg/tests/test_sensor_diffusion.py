import numpy as np
import pytest

from estbayes.analysis.diffusion import fit_diffusivity, increment_variance
from estbayes.analysis.errors import FitError
from estbayes.analysis.sensor import charge_sensitivity, fit_snr
from estbayes.bath import BathConfig, trajectory

T_INT = np.array([50.0, 100.0, 200.0, 400.0, 800.0])


def proportional_snr(snr_at_200=9.2):
    return snr_at_200 * np.sqrt(T_INT / 200.0)


def test_tau_min_from_exact_data():
    fit = fit_snr(T_INT, proportional_snr())
    assert fit.intercept == pytest.approx(0.0, abs=1e-10)
    assert fit.tau_min == pytest.approx(200.0 / 84.64, rel=1e-9)
    assert fit.tau_min == pytest.approx(2.363, rel=1e-3)


def test_doubling_snr_quarters_tau_min():
    base = fit_snr(T_INT, proportional_snr())
    double = fit_snr(T_INT, 2 * proportional_snr())
    assert double.tau_min == pytest.approx(base.tau_min / 4, rel=1e-9)


def test_sensitivity():
    assert charge_sensitivity(2.45) == pytest.approx(4.95e-5, rel=0.01)
    assert fit_snr(T_INT, proportional_snr()).sensitivity == pytest.approx(np.sqrt(2.363e-9), rel=1e-3)


def test_snr_fit_errors():
    with pytest.raises(FitError):
        fit_snr([1.0, 2.0], [1.0, 2.0])
    with pytest.raises(FitError):
        fit_snr(T_INT, proportional_snr()[::-1])


def test_wiener_diffusivity_round_trip(rng):
    d = 10.16**2
    cfg = BathConfig(diffusivity=d, bounds=(-1e6, 1e6))
    times = np.arange(1000) * 26.0
    x = trajectory(np.full(500, 30.0), times, cfg, rng)
    fit = fit_diffusivity(x, 26.0, max_lag=100)
    assert fit.diffusivity == pytest.approx(d, rel=0.05)
    assert fit.lags[0] == 26.0 and fit.lags.size == 100


def test_constant_series_has_zero_diffusivity():
    assert fit_diffusivity(np.full((4, 500), 30.0), 1.0).diffusivity == 0.0


def test_increment_variance_by_hand():
    x = np.array([[0.0, 1.0, 3.0, 6.0]])
    # lag 1 increments 1, 2, 3; lag 2 increments 3, 5
    np.testing.assert_allclose(increment_variance(x, [1, 2]), [np.var([1, 2, 3]), np.var([3, 5])])


def test_short_series_rejected():
    with pytest.raises(FitError):
        fit_diffusivity(np.zeros(100), 1.0)


def test_nonpositive_tau_min_has_no_sensitivity():
    # SNR^2 = 0.5 t + 2 crosses 1 at t = -2
    fit = fit_snr(T_INT, np.sqrt(0.5 * T_INT + 2.0))
    assert fit.tau_min == pytest.approx(-2.0)
    assert np.isnan(fit.sensitivity)
    with pytest.raises(ValueError):
        charge_sensitivity(0.0)
