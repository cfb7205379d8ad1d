"""Grid-Bayesian estimation of dBz from Larmor single shots.

Shot k (k >= 1) evolves for t_k = k * tau_step ns and multiplies every grid
weight by 1/2 [1 + r (alpha + beta cos(2 pi f t_k))], where r = +1 for a
no-tunnel (singlet) outcome and r = -1 for a tunnel (T0) outcome. Bit 0 is
the singlet outcome, bit 1 the tunneling outcome.

Two engines share those semantics: a float engine that renormalizes after
every update, and an integer engine that mirrors a LUT-based FPGA datapath.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .units import GRID_BINS, GRID_F_MAX_MHZ, GRID_F_MIN_MHZ, MHZ_NS, PROBE_TAU_STEP_NS


@dataclass(frozen=True)
class FrequencyGrid:
    n_bins: int = GRID_BINS
    f_min: float = GRID_F_MIN_MHZ
    f_max: float = GRID_F_MAX_MHZ

    def __post_init__(self):
        if self.n_bins < 2:
            raise ValueError("n_bins must be at least 2")
        if not self.f_min < self.f_max:
            raise ValueError("f_min must be below f_max")

    @property
    def spacing(self) -> float:
        return (self.f_max - self.f_min) / (self.n_bins - 1)

    @property
    def centers(self) -> np.ndarray:
        return self.f_min + np.arange(self.n_bins) * self.spacing

    @property
    def code_bits(self) -> int:
        return max(1, math.ceil(math.log2(self.n_bins)))


@dataclass(frozen=True)
class LikelihoodParams:
    alpha: float = 0.0
    beta: float = 1.0

    def __post_init__(self):
        if not -1.0 <= self.alpha <= 1.0 or not 0.0 <= self.beta <= 1.0:
            raise ValueError("alpha must lie in [-1, 1] and beta in [0, 1]")
        if abs(self.alpha) + self.beta > 1.0 + 1e-12:
            raise ValueError("|alpha| + beta must not exceed 1")

    @classmethod
    def from_fidelities(cls, f_s: float, f_t0: float) -> LikelihoodParams:
        """beta = F_S + F_T0 - 1 with alpha = 0."""
        return cls(alpha=0.0, beta=min(1.0, max(0.0, f_s + f_t0 - 1.0)))


@dataclass(frozen=True, eq=False)
class Posterior:
    grid: FrequencyGrid
    weights: np.ndarray
    degenerate: bool = False


def probe_time(k, tau_step: float = PROBE_TAU_STEP_NS):
    return np.asarray(k) * tau_step


def likelihood(freqs, k, outcome, params: LikelihoodParams, tau_step: float = PROBE_TAU_STEP_NS):
    """Probability of ``outcome`` at shot ``k`` for each frequency in MHz."""
    r = np.where(np.asarray(outcome) == 0, 1.0, -1.0)
    phase = 2.0 * math.pi * np.asarray(freqs, dtype=float) * probe_time(k, tau_step) * MHZ_NS
    return 0.5 * (1.0 + r * (params.alpha + params.beta * np.cos(phase)))


def likelihood_table(
    grid: FrequencyGrid, n_max: int, params: LikelihoodParams, tau_step: float = PROBE_TAU_STEP_NS
) -> np.ndarray:
    """Likelihoods indexed [k - 1, bit, bin] for k = 1..n_max."""
    k = np.arange(1, n_max + 1)[:, None, None]
    bit = np.array([0, 1])[None, :, None]
    return likelihood(grid.centers[None, None, :], k, bit, params, tau_step)


def alias_free_band(
    grid: FrequencyGrid, tau_step: float = PROBE_TAU_STEP_NS, guard: float = 5.0
) -> tuple[float, float]:
    """Sub-band of the grid whose alias 1/tau_step - f falls outside the grid
    by at least ``guard`` MHz.

    The probe samples the oscillation every ``tau_step`` ns, so f and
    1/tau_step - f give identical likelihoods. An alias just past the grid
    edge still pulls the argmax, hence the guard.
    """
    sampling = 1.0 / (tau_step * MHZ_NS)
    hi = min(grid.f_max, sampling - grid.f_max - guard, sampling / 2.0)
    if hi <= grid.f_min:
        return grid.f_min, min(grid.f_max, sampling / 2.0)
    return grid.f_min, hi


def init_uniform(grid: FrequencyGrid) -> Posterior:
    return Posterior(grid, np.full(grid.n_bins, 1.0 / grid.n_bins))


def bayes_update(
    p: Posterior, k: int, outcome: int, params: LikelihoodParams, tau_step: float = PROBE_TAU_STEP_NS
) -> Posterior:
    """Multiply by the shot-k likelihood and renormalize.

    An all-zero product (only possible when |alpha| + beta == 1) resets to the
    uniform prior and sets ``degenerate``.
    """
    if k < 1:
        raise ValueError("shot index k starts at 1")
    w = p.weights * likelihood(p.grid.centers, k, outcome, params, tau_step)
    total = w.sum()
    if not total > 0:
        return Posterior(p.grid, np.full(p.grid.n_bins, 1.0 / p.grid.n_bins), degenerate=True)
    return Posterior(p.grid, w / total)


def estimate(p: Posterior) -> float:
    """Center of the most probable bin; ties go to the lowest index."""
    return float(p.grid.centers[int(np.argmax(p.weights))])


class BayesEstimator:
    """Float engine over a batch of independent runs (rows)."""

    def __init__(
        self,
        grid: FrequencyGrid,
        params: LikelihoodParams,
        n_max: int,
        n_runs: int = 1,
        tau_step: float = PROBE_TAU_STEP_NS,
    ):
        self.grid = grid
        self.params = params
        self.n_max = n_max
        self.table = likelihood_table(grid, n_max, params, tau_step)
        self.weights = np.empty((n_runs, grid.n_bins))
        self.degenerate = np.zeros(n_runs, dtype=bool)
        self.reset()

    def reset(self, rows=None) -> None:
        if rows is None:
            self.weights[:] = 1.0 / self.grid.n_bins
            self.degenerate[:] = False
        else:
            self.weights[rows] = 1.0 / self.grid.n_bins
            self.degenerate[rows] = False

    def update(self, k: int, bits, rows=None) -> None:
        bits = np.asarray(bits, dtype=np.intp)
        if rows is None:
            w = self.weights * self.table[k - 1, bits]
        else:
            w = self.weights[rows] * self.table[k - 1, bits]
        total = w.sum(axis=1, keepdims=True)
        bad = ~(total[:, 0] > 0)
        if bad.any():
            w[bad] = 1.0
            total[bad] = self.grid.n_bins
        w /= total
        if rows is None:
            self.weights = w
            self.degenerate |= bad
        else:
            self.weights[rows] = w
            idx = np.arange(self.weights.shape[0])[rows]
            self.degenerate[idx[bad]] = True

    def argmax(self) -> np.ndarray:
        return np.argmax(self.weights, axis=1)

    def estimates(self) -> np.ndarray:
        return self.grid.centers[self.argmax()]


# --- fixed-point datapath -------------------------------------------------


@dataclass(frozen=True)
class FixedPointConfig:
    """Integer widths of the LUT datapath.

    Weights are held in ``accumulator_bits - lut_bits`` bits so that a weight
    times a LUT entry always fits the accumulator. ``renorm_trigger`` defaults
    to half the weight range; ``renormalize=False`` relies on headroom only.
    """

    lut_bits: int = 16
    accumulator_bits: int = 32
    renorm_trigger: int | None = None
    renormalize: bool = True

    def __post_init__(self):
        if not 0 < self.lut_bits < self.accumulator_bits <= 64:
            raise ValueError("need 0 < lut_bits < accumulator_bits <= 64")

    @property
    def weight_bits(self) -> int:
        return self.accumulator_bits - self.lut_bits

    @property
    def trigger(self) -> int:
        if self.renorm_trigger is not None:
            return self.renorm_trigger
        return 1 << (self.weight_bits - 1)


def build_lut(
    grid: FrequencyGrid,
    n_max: int,
    params: LikelihoodParams,
    lut_bits: int = 16,
    tau_step: float = PROBE_TAU_STEP_NS,
) -> np.ndarray:
    """Quantized likelihood table [k - 1, bit, bin] of unsigned ``lut_bits``
    integers: round(L * 2^lut_bits), saturated at 2^lut_bits - 1."""
    scale = 1 << lut_bits
    exact = likelihood_table(grid, n_max, params, tau_step)
    return np.minimum(np.rint(exact * scale), scale - 1).astype(np.uint64)


@dataclass(eq=False)
class FixedPointState:
    weights: np.ndarray  # uint64, shape (..., n_bins)
    shifts: np.ndarray  # accumulated left shifts per run
    degenerate: np.ndarray


class FixedPointEstimator:
    """Integer engine mirroring the LUT datapath, batched over rows."""

    def __init__(
        self,
        grid: FrequencyGrid,
        params: LikelihoodParams,
        n_max: int,
        cfg: FixedPointConfig = FixedPointConfig(),
        n_runs: int = 1,
        tau_step: float = PROBE_TAU_STEP_NS,
        lut: np.ndarray | None = None,
    ):
        self.grid = grid
        self.cfg = cfg
        self.lut = build_lut(grid, n_max, params, cfg.lut_bits, tau_step) if lut is None else lut
        if self.lut.max(initial=0) >= (1 << cfg.lut_bits):
            raise ValueError("LUT entries exceed lut_bits")
        self.full = (1 << cfg.weight_bits) - 1
        self.state = FixedPointState(
            weights=np.empty((n_runs, grid.n_bins), dtype=np.uint64),
            shifts=np.zeros(n_runs, dtype=np.int64),
            degenerate=np.zeros(n_runs, dtype=bool),
        )
        self.reset()

    @property
    def degenerate(self) -> np.ndarray:
        return self.state.degenerate

    def reset(self) -> None:
        self.state.weights[:] = self.full
        self.state.shifts[:] = 0
        self.state.degenerate[:] = False

    def update(self, k: int, bits) -> None:
        cfg = self.cfg
        w = self.state.weights
        rows = self.lut[k - 1, np.asarray(bits, dtype=np.intp)]
        np.multiply(w, rows, out=w)
        np.right_shift(w, np.uint64(cfg.lut_bits), out=w)
        peak = w.max(axis=1)
        dead = peak == 0
        if dead.any():
            w[dead] = self.full
            self.state.degenerate |= dead
            peak[dead] = self.full
        if cfg.renormalize:
            low = peak < cfg.trigger
            if low.any():
                shift = cfg.weight_bits - np.frexp(peak[low].astype(float))[1]
                w[low] <<= shift.astype(np.uint64)[:, None]
                self.state.shifts[low] += shift
        assert int(peak.max()) <= self.full

    def argmax(self) -> np.ndarray:
        return np.argmax(self.state.weights, axis=1)

    def estimates(self) -> np.ndarray:
        return self.grid.centers[self.argmax()]


class ScalarFixedPoint:
    """Single-run integer update with in-place array ops, used for latency
    measurements."""

    def __init__(self, lut: np.ndarray, cfg: FixedPointConfig = FixedPointConfig()):
        self.lut = lut
        self.cfg = cfg
        self.full = (1 << cfg.weight_bits) - 1
        self.weights = np.full(lut.shape[-1], self.full, dtype=np.uint64)
        self._lut_shift = np.uint64(cfg.lut_bits)
        self._trigger = cfg.trigger
        self._wbits = cfg.weight_bits

    def update(self, k: int, bit: int) -> None:
        w = self.weights
        np.multiply(w, self.lut[k - 1, bit], out=w)
        np.right_shift(w, self._lut_shift, out=w)
        peak = int(w.max())
        if peak == 0:
            w[:] = self.full
        elif peak < self._trigger:
            np.left_shift(w, np.uint64(self._wbits - peak.bit_length()), out=w)

    def argmax(self) -> int:
        return int(np.argmax(self.weights))


def fixed_point_init(grid: FrequencyGrid, cfg: FixedPointConfig = FixedPointConfig()) -> FixedPointState:
    full = (1 << cfg.weight_bits) - 1
    return FixedPointState(
        weights=np.full(grid.n_bins, full, dtype=np.uint64),
        shifts=np.zeros((), dtype=np.int64),
        degenerate=np.zeros((), dtype=bool),
    )


def fixed_point_update(
    state: FixedPointState, k: int, outcome: int, lut: np.ndarray, cfg: FixedPointConfig = FixedPointConfig()
) -> FixedPointState:
    """Functional single-run form of ``FixedPointEstimator.update``."""
    engine = FixedPointEstimator.__new__(FixedPointEstimator)
    engine.cfg = cfg
    engine.lut = lut
    engine.full = (1 << cfg.weight_bits) - 1
    engine.state = FixedPointState(
        weights=state.weights.reshape(1, -1).copy(),
        shifts=np.atleast_1d(state.shifts).copy(),
        degenerate=np.atleast_1d(state.degenerate).copy(),
    )
    engine.update(k, [outcome])
    return FixedPointState(engine.state.weights[0], engine.state.shifts[0], engine.state.degenerate[0])


# --- 9-bit frequency code --------------------------------------------------


class QuantizedFrequency(NamedTuple):
    code: int
    clamped: bool


def quantize_frequency(est: float, grid: FrequencyGrid = FrequencyGrid()) -> QuantizedFrequency:
    """Nearest-bin integer code for a frequency; out-of-grid values clamp."""
    idx = int(round((est - grid.f_min) / grid.spacing))
    clamped = idx < 0 or idx >= grid.n_bins
    return QuantizedFrequency(min(max(idx, 0), grid.n_bins - 1), clamped)


def decode_frequency(code: int, grid: FrequencyGrid = FrequencyGrid()) -> float:
    if not 0 <= code < grid.n_bins:
        raise ValueError(f"code {code} outside 0..{grid.n_bins - 1}")
    return float(grid.f_min + code * grid.spacing)


# --- LUT file format -------------------------------------------------------

LUT_MAGIC = b"ESTLUT\x00\x01"
_DIM = struct.Struct("<IIII")  # n_max, n_outcomes, n_bins, lut_bits


def _lut_dtype(lut_bits: int) -> np.dtype:
    for width in (8, 16, 32, 64):
        if lut_bits <= width:
            return np.dtype(f"<u{width // 8}")
    raise ValueError("lut_bits above 64")


def save_lut(path, lut: np.ndarray, lut_bits: int) -> None:
    n_max, n_out, n_bins = lut.shape
    with open(path, "wb") as fh:
        fh.write(LUT_MAGIC)
        fh.write(_DIM.pack(n_max, n_out, n_bins, lut_bits))
        fh.write(np.ascontiguousarray(lut, dtype=_lut_dtype(lut_bits)).tobytes())


def load_lut(path) -> tuple[np.ndarray, int]:
    data = Path(path).read_bytes()
    if data[:8] != LUT_MAGIC:
        raise ValueError("not a LUT file (bad magic)")
    n_max, n_out, n_bins, lut_bits = _DIM.unpack_from(data, 8)
    dtype = _lut_dtype(lut_bits)
    body = data[8 + _DIM.size :]
    expected = n_max * n_out * n_bins * dtype.itemsize
    if len(body) != expected:
        raise ValueError(f"LUT body has {len(body)} bytes, expected {expected}")
    lut = np.frombuffer(body, dtype=dtype).reshape(n_max, n_out, n_bins)
    return lut.astype(np.uint64), lut_bits


# --- convergence study ------------------------------------------------------


@dataclass
class RMSETable:
    n_list: list[int]
    beta_list: list[float]
    alpha: float
    rmse: np.ndarray  # shape (len(beta_list), len(n_list))
    truth_range: tuple[float, float] = field(default=(math.nan, math.nan))

    def cell(self, n: int, beta: float) -> float:
        return float(self.rmse[self.beta_list.index(beta), self.n_list.index(n)])

    def rows(self):
        for i, beta in enumerate(self.beta_list):
            for j, n in enumerate(self.n_list):
                yield n, beta, float(self.rmse[i, j])


def simulate_outcomes(f_true, k, params: LikelihoodParams, rng, tau_step=PROBE_TAU_STEP_NS):
    """Bits for shot k with singlet probability 1/2 [1 + alpha + beta cos]."""
    p_singlet = likelihood(f_true, k, 0, params, tau_step)
    return (rng.random(np.shape(f_true)) >= p_singlet).astype(np.intp)


def rmse_study(
    n_list,
    beta_list,
    alpha: float,
    trials: int,
    rng: np.random.Generator,
    grid: FrequencyGrid = FrequencyGrid(),
    truth_range: tuple[float, float] | None = None,
    tau_step: float = PROBE_TAU_STEP_NS,
) -> RMSETable:
    """RMSE of the argmax estimate versus the number of shots and visibility.

    True frequencies are uniform over ``truth_range`` (default: the alias-free
    part of the grid). Every trial runs once up to max(n_list) and is read
    out at each N, so rows of the table share trials.
    """
    if trials < 1000:
        raise ValueError("need at least 1e3 trials per cell")
    n_list = [int(n) for n in n_list]
    beta_list = [float(b) for b in beta_list]
    lo, hi = truth_range if truth_range is not None else alias_free_band(grid, tau_step)
    n_max = max(n_list)
    rmse = np.empty((len(beta_list), len(n_list)))
    for i, beta in enumerate(beta_list):
        params = LikelihoodParams(alpha, beta)
        f_true = rng.uniform(lo, hi, trials)
        engine = BayesEstimator(grid, params, n_max, trials, tau_step)
        wanted = {n: j for j, n in enumerate(n_list)}
        for k in range(1, n_max + 1):
            engine.update(k, simulate_outcomes(f_true, k, params, rng, tau_step))
            if k in wanted:
                err = engine.estimates() - f_true
                rmse[i, wanted[k]] = math.sqrt(float(np.mean(err**2)))
    return RMSETable(n_list, beta_list, alpha, rmse, (lo, hi))
