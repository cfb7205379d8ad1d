import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from estbayes import estimator as est
from estbayes.estimator import (
    BayesEstimator,
    FixedPointConfig,
    FixedPointEstimator,
    FrequencyGrid,
    LikelihoodParams,
    Posterior,
)

GRID = FrequencyGrid()


def brute_force_posterior(freqs, shots, alpha, beta, tau_step=4.0):
    """Normalized product of likelihoods, evaluated per bin in log space with
    plain math so that it shares no code with the estimator."""
    logs = []
    for f in freqs:
        total = 0.0
        for k, bit in shots:
            r = 1.0 if bit == 0 else -1.0
            total += math.log(0.5 * (1.0 + r * (alpha + beta * math.cos(2 * math.pi * f * k * tau_step * 1e-3))))
        logs.append(total)
    top = max(logs)
    w = [math.exp(v - top) for v in logs]
    s = sum(w)
    return np.array([x / s for x in w])


def sequential(shots, params, grid=GRID):
    post = est.init_uniform(grid)
    for k, bit in shots:
        post = est.bayes_update(post, k, bit, params)
    return post


def test_uniform_prior():
    post = est.init_uniform(GRID)
    assert np.all(post.weights == 1 / 512)
    assert np.allclose(est.init_uniform(FrequencyGrid(2, 10.0, 20.0)).weights, [0.5, 0.5])
    entropy = -np.sum(post.weights * np.log(post.weights))
    assert entropy == pytest.approx(math.log(512), abs=1e-12)


def test_uninformative_update_leaves_posterior():
    post = est.init_uniform(GRID)
    out = est.bayes_update(post, 7, 1, LikelihoodParams(0.0, 0.0))
    np.testing.assert_array_equal(out.weights, post.weights)


def test_single_update_by_hand():
    params = LikelihoodParams(0.0, 1.0)
    # k = 1, t = 4 ns: cos(2 pi 250 MHz 4 ns) = 1 and cos(2 pi 62.5 MHz 4 ns) = 0
    lik = est.likelihood(np.array([250.0, 62.5, 125.0]), 1, 0, params)
    assert lik[0] / lik[1] == pytest.approx(2.0, abs=1e-12)
    # at 125 MHz the cosine is -1, so a singlet outcome rules the bin out
    assert lik[2] == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("n_updates", [1, 17, 70, 200])
def test_posterior_matches_brute_force(n_updates):
    rng = np.random.default_rng(n_updates)
    params = LikelihoodParams(0.02, 0.9)
    ks = rng.integers(1, 71, n_updates)
    bits = rng.integers(0, 2, n_updates)
    shots = list(zip(ks.tolist(), bits.tolist()))
    post = sequential(shots, params)
    oracle = brute_force_posterior(GRID.centers.tolist(), shots, 0.02, 0.9)
    np.testing.assert_allclose(post.weights, oracle, rtol=0, atol=1e-10)


def test_batch_engine_matches_scalar_path():
    rng = np.random.default_rng(3)
    params = LikelihoodParams(0.0, 0.8)
    bits = rng.integers(0, 2, (70, 5))
    engine = BayesEstimator(GRID, params, 70, n_runs=5)
    for k in range(1, 71):
        engine.update(k, bits[k - 1])
    for run in range(5):
        post = sequential([(k, bits[k - 1, run]) for k in range(1, 71)], params)
        np.testing.assert_allclose(engine.weights[run], post.weights, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 70), st.integers(0, 1)), min_size=1, max_size=40), st.randoms())
def test_update_order_does_not_matter(shots, shuffler):
    params = LikelihoodParams(0.0, 0.9)
    permuted = list(shots)
    shuffler.shuffle(permuted)
    a = sequential(shots, params).weights
    b = sequential(permuted, params).weights
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-15)


def test_degenerate_product_resets_to_uniform():
    grid = FrequencyGrid(2, 125.0, 250.0)
    params = LikelihoodParams(0.0, 1.0)
    # bin 125 MHz is ruled out by a singlet at k = 1, bin 250 by a tunnel
    post = est.bayes_update(est.init_uniform(grid), 1, 0, params)
    post = est.bayes_update(post, 1, 1, params)
    assert post.degenerate
    np.testing.assert_array_equal(post.weights, [0.5, 0.5])


def test_argmax_tie_break_and_delta():
    assert est.estimate(est.init_uniform(GRID)) == GRID.f_min
    w = np.zeros(512)
    w[255] = 1.0
    assert est.estimate(Posterior(GRID, w)) == GRID.centers[255]
    w = np.zeros(512)
    w[[100, 200]] = 0.5
    assert est.estimate(Posterior(GRID, w)) == GRID.centers[100]


@given(st.floats(1e-6, 1e6))
def test_argmax_scale_invariant(scale):
    w = np.random.default_rng(0).random(512)
    assert est.estimate(Posterior(GRID, w * scale)) == est.estimate(Posterior(GRID, w))


def test_convergence_at_30_mhz():
    rng = np.random.default_rng(11)
    params = LikelihoodParams(0.0, 0.9)
    trials = 1000
    truth = np.full(trials, 30.0)
    engine = BayesEstimator(GRID, params, 70, n_runs=trials)
    for k in range(1, 71):
        engine.update(k, est.simulate_outcomes(truth, k, params, rng))
    assert np.mean(np.abs(engine.estimates() - 30.0) <= 1.0) >= 0.9


def test_lut_quantization_bound():
    params = LikelihoodParams(0.01, 0.95)
    for bits in (8, 12, 16):
        lut = est.build_lut(GRID, 70, params, bits)
        exact = est.likelihood_table(GRID, 70, params)
        assert np.max(np.abs(lut / 2.0**bits - exact)) <= 2.0**-bits
        assert lut.max() < 2**bits


def test_lut_file_round_trip(tmp_path):
    lut = est.build_lut(GRID, 70, LikelihoodParams(0.0, 0.9), 16)
    path = tmp_path / "lut.bin"
    est.save_lut(path, lut, 16)
    data = path.read_bytes()
    assert data[:8] == est.LUT_MAGIC
    assert len(data) == 8 + 16 + 70 * 2 * 512 * 2
    back, bits = est.load_lut(path)
    assert bits == 16
    np.testing.assert_array_equal(back, lut)


def test_lut_file_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"NOTALUT!" + bytes(16))
    with pytest.raises(ValueError):
        est.load_lut(bad)
    lut = est.build_lut(FrequencyGrid(8, 10, 20), 2, LikelihoodParams(), 16)
    est.save_lut(bad, lut, 16)
    bad.write_bytes(bad.read_bytes()[:-2])
    with pytest.raises(ValueError):
        est.load_lut(bad)


def test_fixed_point_uninformative_keeps_weights_equal():
    engine = FixedPointEstimator(GRID, LikelihoodParams(0.0, 0.0), 70, n_runs=3)
    rng = np.random.default_rng(0)
    for k in range(1, 71):
        engine.update(k, rng.integers(0, 2, 3))
    w = engine.state.weights
    assert np.all(w == w[:, :1])
    assert np.all(engine.estimates() == GRID.f_min)


def golden_fixed_point(lut, shots, lut_bits=16, acc_bits=32):
    """Bit-exact reference of the integer datapath with Python ints."""
    wbits = acc_bits - lut_bits
    full = (1 << wbits) - 1
    trigger = 1 << (wbits - 1)
    w = [full] * lut.shape[-1]
    for k, bit in shots:
        row = [int(x) for x in lut[k - 1, bit]]
        w = [(a * b) >> lut_bits for a, b in zip(w, row)]
        assert all(a < (1 << acc_bits) for a in w)
        peak = max(w)
        if peak == 0:
            w = [full] * len(w)
        elif peak < trigger:
            shift = wbits - peak.bit_length()
            w = [a << shift for a in w]
    return w


def test_fixed_point_matches_golden_model():
    params = LikelihoodParams(0.0, 0.9)
    cfg = FixedPointConfig()
    lut = est.build_lut(GRID, 70, params, cfg.lut_bits)
    rng = np.random.default_rng(5)
    shots = [(k, int(rng.integers(0, 2))) for k in range(1, 71)]
    state = est.fixed_point_init(GRID, cfg)
    scalar = est.ScalarFixedPoint(lut, cfg)
    for k, bit in shots:
        state = est.fixed_point_update(state, k, bit, lut, cfg)
        scalar.update(k, bit)
    golden = golden_fixed_point(lut, shots)
    assert state.weights.tolist() == golden
    assert scalar.weights.tolist() == golden
    assert int(state.shifts) > 0


def _agreement(accumulator_bits, trials=1000, seed=21):
    rng = np.random.default_rng(seed)
    params = LikelihoodParams(0.0, 0.9)
    cfg = FixedPointConfig(accumulator_bits=accumulator_bits)
    lo, hi = est.alias_free_band(GRID)
    truth = rng.uniform(lo, hi, trials)
    flt = BayesEstimator(GRID, params, 70, n_runs=trials)
    fix = FixedPointEstimator(GRID, params, 70, cfg, n_runs=trials)
    for k in range(1, 71):
        bits = est.simulate_outcomes(truth, k, params, rng)
        flt.update(k, bits)
        fix.update(k, bits)
    a, b = flt.argmax(), fix.argmax()
    return np.mean(a == b), np.abs(a.astype(int) - b.astype(int)).max()


@pytest.mark.parametrize("accumulator_bits", [32, 48, 64])
def test_fixed_point_argmax_agreement(accumulator_bits):
    same, _ = _agreement(accumulator_bits)
    assert same >= 0.99


@pytest.mark.parametrize(
    "accumulator_bits",
    [
        pytest.param(
            32,
            marks=pytest.mark.xfail(
                strict=True,
                reason="16-bit weights: a bin that rounds to zero never recovers, "
                "so a few runs in 1e3 land more than one bin away",
            ),
        ),
        48,
        64,
    ],
)
def test_fixed_point_gap_at_most_one_bin(accumulator_bits):
    # the gross-miss rate at 32 bits is about 1e-3 per probe; 1e4 probes make
    # the outcome of this test independent of the seed
    _, gap = _agreement(accumulator_bits, trials=10_000)
    assert gap <= 1


def test_quantize_frequency():
    assert est.quantize_frequency(GRID.f_min).code == 0
    assert est.quantize_frequency(GRID.f_max).code == 511
    q = est.quantize_frequency(30.0)
    assert q == (68, False)
    assert est.decode_frequency(68) == pytest.approx(10 + 68 * 150 / 511)
    assert round(est.decode_frequency(68), 2) == 29.96
    assert est.quantize_frequency(5.0) == (0, True)
    assert est.quantize_frequency(200.0) == (511, True)
    with pytest.raises(ValueError):
        est.decode_frequency(512)


@given(st.floats(10.0, 160.0))
def test_quantization_error_at_most_half_bin(f):
    back = est.decode_frequency(est.quantize_frequency(f).code)
    assert abs(back - f) <= GRID.spacing / 2 + 1e-12


def test_alias_free_band():
    lo, hi = est.alias_free_band(GRID)
    # samples every 4 ns: f aliases onto 250 - f, which must stay 5 MHz above 160
    assert lo == 10.0 and hi == pytest.approx(85.0)


def test_rmse_uninformative_baseline():
    rng = np.random.default_rng(4)
    table = est.rmse_study([20], [0.0], 0.0, 2000, rng, truth_range=(10.0, 85.0))
    # every estimate is f_min, so the RMSE is that of U(10, 85) about 10
    assert table.cell(20, 0.0) == pytest.approx(75.0 / math.sqrt(3.0), rel=0.03)


def test_rmse_study_visibility_ordering():
    rng = np.random.default_rng(8)
    n_list = list(range(20, 121, 10))
    table = est.rmse_study(n_list, [0.5, 0.9], 0.0, 1000, rng)
    assert table.cell(70, 0.9) < 1.0
    assert all(table.cell(n, 0.5) > table.cell(n, 0.9) for n in n_list)


def test_likelihood_param_validation():
    with pytest.raises(ValueError):
        LikelihoodParams(0.2, 0.9)
    p = LikelihoodParams.from_fidelities(0.99, 0.98)
    assert p.beta == pytest.approx(0.97)
