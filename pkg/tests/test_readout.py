import math

import numpy as np
import pytest

from estbayes import readout as ro
from estbayes.readout import ReadoutConfig, SensorTrace
from estbayes.spin_model import SpinLabel, SpinOutcomeModel, detection_given_label

NOISELESS = ReadoutConfig(snr_at_tint=math.inf)


@pytest.fixture(scope="module")
def device_sweep():
    thresholds = np.arange(0.30, 0.80 + 1e-9, 0.02)
    e_t, e_n = ro.threshold_sweep(ReadoutConfig.device_like(), thresholds, 100_000, np.random.default_rng(7))
    return thresholds, e_t, e_n


def test_noiseless_singlet_trace_is_flat(rng):
    trace = ro.synthesize_trace(SpinLabel.S, NOISELESS, rng)
    assert np.all(trace.samples == 0.0)
    assert trace.tunnel_out is None
    assert not ro.discriminate(trace, 0.5).detected


def test_mean_tunnel_onset(rng):
    # 1e5 noiseless traces; the integrated step crosses 0.5 half a window late
    cfg = NOISELESS
    onsets = []
    for _ in range(20):
        samples, t_out, _ = ro.synthesize_traces(np.ones(5000, dtype=bool), cfg, rng)
        crossed = samples > 0.5
        hit = crossed.any(axis=1)
        idx = np.argmax(crossed, axis=1)[hit]
        onsets.append(idx * cfg.sample_period / 1e3 - 0.5 * cfg.t_int / 1e3)
    onset = np.concatenate(onsets)
    assert onset.mean() == pytest.approx(1.0, rel=0.02)


def test_boxcar_noise_matches_snr(rng):
    samples, _, _ = ro.synthesize_traces(np.zeros(200, dtype=bool), ReadoutConfig(), rng)
    assert samples.std() == pytest.approx(1 / 9.2, rel=0.03)


def test_discriminate_noiseless_blip(rng):
    trace = ro.synthesize_trace(SpinLabel.T0, NOISELESS, rng)
    shot = ro.discriminate(trace, 0.5)
    assert shot.detected
    # blip shorter than the window never reaches threshold; allow for that only
    assert abs(shot.first_crossing - trace.tunnel_out) <= NOISELESS.t_int / 1e3


def test_all_zero_trace_not_detected():
    assert ro.discriminate(SensorTrace(np.zeros(100), 5.0), 0.5) == ro.ShotResult(False, None)
    with pytest.raises(ValueError):
        ro.discriminate(SensorTrace(np.zeros(10), 5.0), 1.5)


def test_threshold_sweep_is_u_shaped(device_sweep):
    thresholds, e_t, e_n = device_sweep
    total = e_t + e_n
    best = int(np.argmin(total))
    assert 0 < best < thresholds.size - 1
    # both arms rise well clear of the binomial noise at the minimum
    noise = 5 * math.sqrt(total[best] / 100_000)
    assert total[0] > total[best] + noise and total[-1] > total[best] + noise
    assert np.all(np.diff(e_t) >= 0) and np.all(np.diff(e_n) <= 0)


def test_device_like_errors_within_factor_two(device_sweep):
    thresholds, e_t, e_n = device_sweep
    i = int(np.argmin(np.abs(thresholds - ReadoutConfig.device_like().threshold)))
    assert 0.014 / 2 <= e_t[i] <= 0.014 * 2
    assert 0.007 / 2 <= e_n[i] <= 0.007 * 2


def test_extreme_threshold(rng):
    strict = ro.detection_error_rates(ReadoutConfig(), 0.999 * (1 + 4 / 9.2), 10_000, rng)
    loose = ro.detection_error_rates(ReadoutConfig(), 0.5, 10_000, rng)
    assert strict.e_n == 0.0
    assert strict.e_t > 0.5 > loose.e_t


def test_noiseless_error_rates(rng):
    errors = ro.detection_error_rates(NOISELESS, 0.5, 10_000, rng)
    # P(no tunnel within 15 us) = e^-15; blips shorter than half a window are the other loss
    assert errors.e_n == 0.0
    assert errors.e_t <= math.exp(-15) + 0.5 * 0.2 * 1.0 + 0.01
    assert errors.e_t_ci[0] <= errors.e_t <= errors.e_t_ci[1]
    with pytest.raises(ValueError):
        ro.detection_error_rates(NOISELESS, 0.5, 100, rng)


@pytest.mark.parametrize("t_int, expected, rel", [(200.0, 9.2, 0.03), (50.0, 4.6, 0.05), (800.0, 18.4, 0.05)])
def test_snr_scales_with_root_time(rng, t_int, expected, rel):
    ((t, snr),) = ro.snr_curve(ReadoutConfig(), [t_int], rng)
    assert t == t_int
    assert snr == pytest.approx(expected, rel=rel)


def test_single_shots_ideal(rng):
    ideal = SpinOutcomeModel()
    for mode in ("analytic", "trace"):
        assert not ro.single_shots(np.zeros(500, dtype=int), ideal, NOISELESS, rng, mode).any()
    assert ro.single_shots(np.ones(500, dtype=int), ideal, NOISELESS, rng, "analytic").all()
    assert ro.single_shot(SpinLabel.T0, ideal, NOISELESS, rng) == 1


def test_analytic_and_trace_paths_agree(rng, device_sweep):
    cfg = ReadoutConfig.device_like()
    thresholds, e_t, e_n = device_sweep
    i = int(np.argmin(np.abs(thresholds - cfg.threshold)))
    # the analytic path uses the error rates the trace path actually produces
    model = SpinOutcomeModel.device().with_detection(float(e_t[i]), float(e_n[i]))
    n = 100_000
    labels = np.where(rng.random(n) < 0.5, SpinLabel.T0, SpinLabel.S)
    f_trace = ro.single_shots(labels, model, cfg, rng, "trace").mean()
    f_analytic = ro.single_shots(labels, model, cfg, rng, "analytic").mean()
    p = np.mean(detection_given_label(labels, model))
    sigma = math.sqrt(2 * p * (1 - p) / n)
    assert abs(f_trace - f_analytic) <= 3 * sigma


def test_init_check_errors_are_small():
    miss, false_alarm = ro.init_check_errors(ReadoutConfig.device_like())
    assert 0 < miss < 1e-3 and 0 < false_alarm < 1e-3
    assert ro.init_check_errors(NOISELESS) == (0.0, 0.0)


def test_trace_csv(tmp_path, rng):
    trace = ro.synthesize_trace(SpinLabel.T0, ReadoutConfig(t_meas=1.0), rng)
    path = tmp_path / "trace.csv"
    ro.write_trace_csv(trace, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "time_ns,value"
    assert len(lines) == trace.samples.size + 1
    t, v = lines[5].split(",")
    assert float(t) == 20.0 and float(v) == trace.samples[4]


def test_config_validation():
    with pytest.raises(ValueError):
        ReadoutConfig(t_int=7.0)
    with pytest.raises(ValueError):
        ReadoutConfig(tunnel_out_rate=0.0)
