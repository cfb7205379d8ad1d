import numpy as np
import pytest

from estbayes import bath
from estbayes.bath import BathConfig, BathState


def test_frozen_bath_does_not_move(rng):
    cfg = BathConfig(diffusivity=0.0, reversion_rate=0.0)
    state = BathState(31.5)
    for dt in (0.1, 26.0, 1e4):
        state = bath.step(state, dt, cfg, rng)
    assert state.delta_bz == 31.5
    assert state.elapsed == pytest.approx(0.1 + 26.0 + 1e4)


def test_wiener_variance_grows_as_d_times_t(rng):
    # (10.16 kHz)^2/us over 1000 us gives 0.10323 MHz^2
    cfg = BathConfig(diffusivity=10.16**2, reversion_rate=0.0, bounds=(-1e6, 1e6))
    start = np.full(10_000, 30.0)
    traj = bath.trajectory(start, [0.0, 250.0, 500.0, 1000.0], cfg, rng)
    var = np.var(traj[:, -1] - traj[:, 0])
    assert var == pytest.approx(0.10323, rel=0.05)


def test_reflection_keeps_values_in_band(rng):
    cfg = BathConfig(diffusivity=0.0, mean=-1000.0, reversion_rate=1.0)
    out = bath.step_values(np.full(100, 10.0), 1.0, cfg, rng)
    assert np.all(out >= 10.0)
    assert np.all(out <= 160.0)


def test_reflect_is_a_mirror():
    assert bath.reflect(9.0, 10.0, 160.0) == pytest.approx(11.0)
    assert bath.reflect(161.5, 10.0, 160.0) == pytest.approx(158.5)
    assert bath.reflect(50.0, 10.0, 160.0) == 50.0


def test_stationary_ou_spread(rng):
    cfg = BathConfig().with_stationary_sigma(2.0)
    x = np.full(4000, cfg.mean)
    # several relaxation times so the ensemble forgets its start
    dt = 0.05 / cfg.reversion_rate
    for _ in range(200):
        x = bath.step_values(x, dt, cfg, rng)
    assert np.std(x) == pytest.approx(2.0, rel=0.05)


def test_ensemble_moments(rng):
    draw = bath.ensemble_sample(BathConfig(mean=30.0), 5.0, rng, size=100_000)
    assert draw.mean() == pytest.approx(30.0, abs=0.05)
    assert draw.std() == pytest.approx(5.0, abs=0.05)


def test_ensemble_tiny_sigma_returns_mean(rng):
    assert bath.ensemble_sample(BathConfig(mean=30.0), 1e-12, rng) == pytest.approx(30.0, abs=1e-9)
    with pytest.raises(ValueError):
        bath.ensemble_sample(BathConfig(), 0.0, rng)


def test_ensemble_respects_bounds(rng):
    draw = bath.ensemble_sample(BathConfig(mean=110.0), 5.0, rng, size=10_000)
    assert draw.min() >= 10.0 and draw.max() <= 160.0
    edge = bath.ensemble_sample(BathConfig(mean=158.0), 5.0, rng, size=10_000)
    assert edge.max() <= 160.0


def test_nonpositive_dt_rejected(rng):
    with pytest.raises(ValueError):
        bath.step_values(np.array([30.0]), 0.0, BathConfig(), rng)


def test_stationary_rate_needs_positive_sigma():
    with pytest.raises(ValueError):
        bath.stationary_reversion_rate(100.0, 0.0)
    with pytest.raises(ValueError):
        bath.stationary_reversion_rate(100.0, -1.0)
