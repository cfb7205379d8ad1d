"""Energy-selective-tunneling single-shot readout.

A triplet electron tunnels out after an exponential wait and is reloaded
after a second exponential wait, producing a unit-contrast blip in the
charge-sensor signal. Raw samples carry white Gaussian noise scaled so the
boxcar-integrated signal has the configured SNR. Discrimination flags a
tunneling event as soon as any integrated sample crosses the threshold.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy import stats

from .spin_model import SpinLabel, SpinOutcomeModel, detection_given_label
from .units import NS_PER_US

_CHUNK = 2000


@dataclass(frozen=True)
class ReadoutConfig:
    t_meas: float = 15.0  # us
    t_int: float = 200.0  # ns
    sample_period: float = 5.0  # ns
    tunnel_out_rate: float = 1.0  # MHz
    tunnel_in_rate: float = 1.0  # MHz
    snr_at_tint: float = 9.2
    threshold: float = 0.5
    spurious_rate: float = 0.0  # MHz, background charge jumps seen by the sensor

    def __post_init__(self):
        if self.t_meas <= 0:
            raise ValueError("t_meas must be positive")
        if self.tunnel_out_rate <= 0 or self.tunnel_in_rate <= 0:
            raise ValueError("tunnel rates must be positive")
        ratio = self.t_int / self.sample_period
        if ratio < 1 or abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("t_int must be a positive multiple of sample_period")
        if self.snr_at_tint <= 0:
            raise ValueError("snr_at_tint must be positive")

    @classmethod
    def device_like(cls) -> ReadoutConfig:
        """Slow reload, a weak background of spurious charge jumps and the
        threshold minimizing E_T + E_N; calibrated so the synthetic error
        rates land near E_T ~ 1.4 %, E_N ~ 0.7 %."""
        return cls(tunnel_in_rate=0.15, spurious_rate=4e-4, threshold=0.52)

    @property
    def n_samples(self) -> int:
        return int(round(self.t_meas * NS_PER_US / self.sample_period))

    @property
    def boxcar(self) -> int:
        return int(round(self.t_int / self.sample_period))

    @property
    def raw_sigma(self) -> float:
        """Noise std per raw sample giving unit contrast / snr after the boxcar."""
        if math.isinf(self.snr_at_tint):
            return 0.0
        return math.sqrt(self.boxcar) / self.snr_at_tint


@dataclass
class SensorTrace:
    samples: np.ndarray
    sample_period: float  # ns
    tunnel_out: float | None = None  # us, generator ground truth
    tunnel_in: float | None = None

    @property
    def times_ns(self) -> np.ndarray:
        return np.arange(self.samples.size) * self.sample_period


class ShotResult(NamedTuple):
    detected: bool
    first_crossing: float | None  # us


@dataclass(frozen=True)
class DetectionErrors:
    e_t: float
    e_n: float
    e_t_ci: tuple[float, float]
    e_n_ci: tuple[float, float]
    n_trials: int
    threshold: float = field(default=math.nan)


def _tunnel_times(n: int, cfg: ReadoutConfig, rng: np.random.Generator):
    t_out = rng.exponential(1.0 / cfg.tunnel_out_rate, n)
    t_in = t_out + rng.exponential(1.0 / cfg.tunnel_in_rate, n)
    return t_out, t_in


def _integrate(raw: np.ndarray, boxcar: int) -> np.ndarray:
    c = np.cumsum(raw, axis=-1, dtype=float)
    out = c[..., boxcar - 1 :].copy()
    out[..., 1:] -= c[..., :-boxcar]
    return out / boxcar


def _raw_block(blip_out, blip_in, cfg: ReadoutConfig, rng: np.random.Generator):
    """Raw samples including a baseline pre-roll so that every integrated
    sample averages a full window."""
    n, b = cfg.n_samples, cfg.boxcar
    t_us = (np.arange(-(b - 1), n) * cfg.sample_period / NS_PER_US)[None, :]
    high = (t_us >= blip_out[:, None]) & (t_us < blip_in[:, None])
    raw = high.astype(float)
    if cfg.spurious_rate > 0:
        s_out = rng.exponential(1.0 / cfg.spurious_rate, blip_out.size)
        s_in = s_out + rng.exponential(1.0 / cfg.tunnel_in_rate, blip_out.size)
        raw = np.maximum(raw, (t_us >= s_out[:, None]) & (t_us < s_in[:, None]))
    if cfg.raw_sigma > 0:
        raw += cfg.raw_sigma * rng.standard_normal(raw.shape, dtype=np.float32)
    return raw


def synthesize_traces(triplet_like, cfg: ReadoutConfig, rng: np.random.Generator):
    """Integrated traces for a boolean array of tunneling/non-tunneling shots.

    Returns (samples, tunnel_out, tunnel_in); samples has shape
    (n, n_samples) and the tunnel times are NaN for non-tunneling shots.
    """
    trip = np.asarray(triplet_like, dtype=bool)
    t_out, t_in = _tunnel_times(trip.size, cfg, rng)
    t_out = np.where(trip, t_out, np.nan)
    t_in = np.where(trip, t_in, np.nan)
    raw = _raw_block(np.nan_to_num(t_out, nan=np.inf), np.nan_to_num(t_in, nan=np.inf), cfg, rng)
    return _integrate(raw, cfg.boxcar), t_out, t_in


def synthesize_trace(label: SpinLabel, cfg: ReadoutConfig, rng: np.random.Generator) -> SensorTrace:
    """One integrated sensor trace for a final spin state."""
    trip = SpinLabel(label).is_triplet
    samples, t_out, t_in = synthesize_traces(np.array([trip]), cfg, rng)
    return SensorTrace(
        samples=samples[0],
        sample_period=cfg.sample_period,
        tunnel_out=None if not trip else float(t_out[0]),
        tunnel_in=None if not trip else float(t_in[0]),
    )


def discriminate(trace: SensorTrace, threshold: float) -> ShotResult:
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    above = np.flatnonzero(trace.samples > threshold)
    if above.size == 0:
        return ShotResult(False, None)
    return ShotResult(True, float(above[0] * trace.sample_period / NS_PER_US))


def _trace_maxima(triplet_like: bool, n: int, cfg: ReadoutConfig, rng: np.random.Generator):
    out = np.empty(n)
    for start in range(0, n, _CHUNK):
        m = min(_CHUNK, n - start)
        samples, _, _ = synthesize_traces(np.full(m, triplet_like), cfg, rng)
        out[start : start + m] = samples.max(axis=1)
    return out


def _binomial_ci(k: int, n: int) -> tuple[float, float]:
    ci = stats.binomtest(int(k), int(n)).proportion_ci(confidence_level=0.95)
    return float(ci.low), float(ci.high)


def threshold_sweep(cfg: ReadoutConfig, thresholds, n_trials: int, rng: np.random.Generator):
    """E_T and E_N over a grid of thresholds from one shared set of traces."""
    thresholds = np.asarray(thresholds, dtype=float)
    max_t = _trace_maxima(True, n_trials, cfg, rng)
    max_s = _trace_maxima(False, n_trials, cfg, rng)
    e_t = np.mean(max_t[None, :] <= thresholds[:, None], axis=1)
    e_n = np.mean(max_s[None, :] > thresholds[:, None], axis=1)
    return e_t, e_n


def detection_error_rates(
    cfg: ReadoutConfig, threshold: float, n_trials: int, rng: np.random.Generator
) -> DetectionErrors:
    """Monte-Carlo tunneling-miss (E_T) and false-detection (E_N) rates."""
    if n_trials < 10_000:
        raise ValueError("n_trials must be at least 1e4")
    max_t = _trace_maxima(True, n_trials, cfg, rng)
    max_s = _trace_maxima(False, n_trials, cfg, rng)
    k_t = int(np.sum(max_t <= threshold))
    k_n = int(np.sum(max_s > threshold))
    return DetectionErrors(
        e_t=k_t / n_trials,
        e_n=k_n / n_trials,
        e_t_ci=_binomial_ci(k_t, n_trials),
        e_n_ci=_binomial_ci(k_n, n_trials),
        n_trials=n_trials,
        threshold=threshold,
    )


def snr_curve(cfg: ReadoutConfig, t_int_list, rng: np.random.Generator, n_samples: int = 400_000):
    """Measured SNR (unit contrast / integrated noise std) per integration time.

    The raw noise level is fixed by ``cfg`` and every entry of ``t_int_list``
    re-integrates the same raw record.
    """
    raw = cfg.raw_sigma * rng.standard_normal(n_samples)
    out = []
    for t_int in t_int_list:
        ratio = t_int / cfg.sample_period
        if abs(ratio - round(ratio)) > 1e-9 or ratio < 1:
            raise ValueError(f"t_int={t_int} is not a multiple of the sample period")
        b = int(round(ratio))
        # non-overlapping windows so the std estimate uses independent samples
        blocks = raw[: (n_samples // b) * b].reshape(-1, b).mean(axis=1)
        sigma = blocks.std(ddof=1)
        out.append((float(t_int), math.inf if sigma == 0 else 1.0 / sigma))
    return out


def init_check_errors(cfg: ReadoutConfig) -> tuple[float, float]:
    """(miss, false_alarm) for one integrated initialization-check sample."""
    if math.isinf(cfg.snr_at_tint):
        return 0.0, 0.0
    miss = float(stats.norm.cdf((cfg.threshold - 1.0) * cfg.snr_at_tint))
    false_alarm = float(stats.norm.sf(cfg.threshold * cfg.snr_at_tint))
    return miss, false_alarm


def single_shots(
    labels,
    model: SpinOutcomeModel,
    cfg: ReadoutConfig,
    rng: np.random.Generator,
    mode: str = "analytic",
) -> np.ndarray:
    """Detected bits (1 = tunneling seen) for an array of final spin labels."""
    labels = np.asarray(labels)
    if mode == "analytic":
        return (rng.random(labels.shape) < detection_given_label(labels, model)).astype(np.int8)
    if mode != "trace":
        raise ValueError(f"unknown readout mode {mode!r}")
    thermal = rng.random(labels.shape) < model.alpha_s
    tunnels = (labels != SpinLabel.S) | thermal
    bits = np.empty(labels.shape, dtype=np.int8)
    flat_t, flat_b = tunnels.ravel(), bits.reshape(-1)
    for start in range(0, flat_t.size, _CHUNK):
        sl = slice(start, start + _CHUNK)
        samples, _, _ = synthesize_traces(flat_t[sl], cfg, rng)
        flat_b[sl] = np.any(samples > cfg.threshold, axis=1)
    return bits


def single_shot(
    label: SpinLabel,
    model: SpinOutcomeModel,
    cfg: ReadoutConfig,
    rng: np.random.Generator,
    mode: str = "analytic",
) -> int:
    return int(single_shots(np.array([int(label)]), model, cfg, rng, mode)[0])


def with_measured_errors(model: SpinOutcomeModel, errors: DetectionErrors) -> SpinOutcomeModel:
    return replace(model, e_t=errors.e_t, e_n=errors.e_n)


def write_trace_csv(trace: SensorTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_ns", "value"])
        for t, v in zip(trace.times_ns, trace.samples):
            writer.writerow([repr(float(t)), repr(float(v))])
