"""Probe / heralded / active-feedback control loops.

Every loop runs a batch of independent experiments (rows) in lock step so
that large datasets vectorize; each row keeps its own wall clock and bath
value. The scalar entry points (``probe_step``, ``heralded_run``,
``feedback_run``) run a single row and keep a per-shot log.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import bath as bath_mod
from .bath import BathConfig, BathState
from .estimator import (
    BayesEstimator,
    FixedPointConfig,
    FixedPointEstimator,
    FrequencyGrid,
    LikelihoodParams,
    Posterior,
    decode_frequency,
    quantize_frequency,
)
from .qubit import RabiDriveParams, exchange_flip_prob, larmor_flip_prob, rabi_prob, sample_outcome
from .readout import ReadoutConfig, init_check_errors, single_shots
from .spin_model import SpinOutcomeModel, measurement_fidelities
from .units import NS_PER_US, PROBE_TAU_STEP_NS

LOG_HEADER = ("shot", "t_us", "mode", "outcome", "estimate_mhz", "herald", "init_attempts")


class InitializationError(RuntimeError):
    """Adaptive initialization exceeded its attempt cap (stuck reload)."""


@dataclass(frozen=True)
class ProbeConfig:
    n_shots: int = 70
    tau_step: float = PROBE_TAU_STEP_NS
    likelihood: LikelihoodParams | None = None  # None: beta = F_S + F_T0 - 1

    def __post_init__(self):
        if self.n_shots < 1:
            raise ValueError("n_shots must be at least 1")


@dataclass(frozen=True)
class HeraldConfig:
    target: float = 30.0
    tolerance: float = 0.1
    op_shots: int = 20

    def __post_init__(self):
        if self.tolerance < 0:
            raise ValueError("tolerance must be non-negative")


@dataclass(frozen=True)
class TimingModel:
    """Per-shot latency budget in us.

    A probe shot lasts attempts * t_init_check + evolution + t_meas + t_calc
    + probe latency; an operation shot drops t_calc and uses the operation
    latency. The latencies fill the nominal periods at one init attempt.
    """

    t_meas: float = 15.0
    t_calc: float = 10.0
    t_init_check: float = 0.2
    probe_period: float = 26.0
    op_period: float = 16.0
    pipelined_calc: bool = False

    def __post_init__(self):
        if self.probe_period < self.t_meas or self.op_period < self.t_meas:
            raise ValueError("periods must cover the measurement time")

    @property
    def probe_latency(self) -> float:
        return max(0.0, self.probe_period - self.t_meas - self.t_calc - self.t_init_check)

    @property
    def op_latency(self) -> float:
        return max(0.0, self.op_period - self.t_meas - self.t_init_check)

    def probe_shot(self, attempts, evolution_ns):
        calc = 0.0 if self.pipelined_calc else self.t_calc
        return (
            np.asarray(attempts) * self.t_init_check
            + np.asarray(evolution_ns) / NS_PER_US
            + self.t_meas
            + calc
            + self.probe_latency
        )

    def op_shot(self, attempts, evolution_us):
        return (
            np.asarray(attempts) * self.t_init_check
            + np.asarray(evolution_us)
            + self.t_meas
            + self.op_latency
        )


@dataclass(frozen=True)
class LoopRecord:
    shot: int
    t_us: float
    mode: str
    outcome: int
    estimate_mhz: float
    herald: bool
    init_attempts: int


@dataclass(frozen=True)
class Environment:
    """Everything a loop needs to turn control decisions into outcomes."""

    bath: BathConfig = field(default_factory=BathConfig)
    readout: ReadoutConfig = field(default_factory=ReadoutConfig)
    model: SpinOutcomeModel = field(default_factory=SpinOutcomeModel.ideal)
    grid: FrequencyGrid = field(default_factory=FrequencyGrid)
    timing: TimingModel = field(default_factory=TimingModel)
    init_success_prob: float = 0.9
    init_attempt_cap: int = 10_000
    readout_mode: str = "analytic"
    leakage: float = 0.0  # S-T+ leakage per feedback-mode shot
    sigma_ensemble: float = 10.0
    fixed_point: FixedPointConfig | None = None

    def __post_init__(self):
        if not 0.0 < self.init_success_prob <= 1.0:
            raise ValueError("init_success_prob must lie in (0, 1]")
        if not 0.0 <= self.leakage <= 1.0:
            raise ValueError("leakage must lie in [0, 1]")
        if self.sigma_ensemble < 0:
            raise ValueError("sigma_ensemble must be non-negative")
        if self.init_attempt_cap < 1:
            raise ValueError("init_attempt_cap must be at least 1")

    @classmethod
    def device(cls, **overrides) -> Environment:
        """Measured error budget with a mean-reverting bath whose stationary
        spread is ``sigma_ensemble``."""
        sigma = overrides.pop("sigma_ensemble", 10.0)
        bath = overrides.pop("bath", BathConfig()).with_stationary_sigma(sigma)
        kwargs = dict(bath=bath, model=SpinOutcomeModel.device(), readout=ReadoutConfig.device_like())
        kwargs.update(overrides)
        return cls(sigma_ensemble=sigma, **kwargs)

    def likelihood(self, probe: ProbeConfig) -> LikelihoodParams:
        if probe.likelihood is not None:
            return probe.likelihood
        return LikelihoodParams.from_fidelities(*measurement_fidelities(self.model))


class InitResult(NamedTuple):
    attempts: int
    false_init: bool


class OpShot(NamedTuple):
    """Operation-shot request: evolution time in ns and the pulse kind
    ("larmor" or "exchange"); ``j_exchange`` in MHz for exchange pulses."""

    tau_ns: np.ndarray
    mode: str = "larmor"
    j_exchange: np.ndarray | float = 0.0


Experiment = Callable[[np.ndarray, np.ndarray], OpShot]


def _init_pass_probs(env: Environment, success_prob: float) -> tuple[float, float]:
    """Per-check pass probability and the fraction of passes that are false."""
    if not 0 < success_prob <= 1:
        raise ValueError("init_success_prob must lie in (0, 1]")
    miss, false_alarm = init_check_errors(env.readout)
    ok = success_prob * (1.0 - false_alarm)
    bad = (1.0 - success_prob) * miss
    p_pass = ok + bad
    if p_pass <= 0:
        return 0.0, 0.0
    return p_pass, bad / p_pass


def false_init_probability(env: Environment, init_success_prob: float | None = None) -> float:
    """Probability that a confirmed initialization actually left a triplet."""
    p = env.init_success_prob if init_success_prob is None else init_success_prob
    return _init_pass_probs(env, p)[1]


def _draw_inits(env: Environment, success_prob: float, n: int, rng: np.random.Generator):
    p_pass, p_false = _init_pass_probs(env, success_prob)
    if p_pass <= 0:
        raise InitializationError("initialization check can never pass")
    attempts = rng.geometric(p_pass, n)
    if attempts.max(initial=0) > env.init_attempt_cap:
        raise InitializationError(
            f"initialization needed more than {env.init_attempt_cap} attempts"
        )
    false_init = rng.random(n) < p_false
    return attempts, false_init


def adaptive_initialize(env: Environment, init_success_prob: float, rng: np.random.Generator) -> InitResult:
    """Repeat 200 ns threshold checks until the dot reads as singlet."""
    attempts, false_init = _draw_inits(env, init_success_prob, 1, rng)
    return InitResult(int(attempts[0]), bool(false_init[0]))


class LoopEngine:
    """Lock-step batch of independent probe/operate loops."""

    def __init__(
        self,
        env: Environment,
        probe: ProbeConfig,
        start,
        rng: np.random.Generator,
        record: bool = False,
    ):
        self.env = env
        self.probe_cfg = probe
        self.rng = rng
        self.dbz = np.atleast_1d(np.asarray(start, dtype=float)).copy()
        n = self.dbz.size
        self.clock = np.zeros(n)
        self.op_time = np.zeros(n)
        self.probe_time = np.zeros(n)
        self.shot = np.zeros(n, dtype=np.int64)
        self.op_counter = 0
        self.record = record
        self.records: list[LoopRecord] = []
        params = env.likelihood(probe)
        if env.fixed_point is not None:
            self.estimator = FixedPointEstimator(
                env.grid, params, probe.n_shots, env.fixed_point, n, probe.tau_step
            )
        else:
            self.estimator = BayesEstimator(env.grid, params, probe.n_shots, n, probe.tau_step)
        self._triplet_model = env.model.with_init_error(1.0)

    @property
    def n_runs(self) -> int:
        return self.dbz.size

    def _labels(self, p_t0, false_init):
        labels = sample_outcome(p_t0, self.env.model, self.rng)
        if false_init.any():
            labels[false_init] = sample_outcome(p_t0[false_init], self._triplet_model, self.rng)
        return labels

    def _advance(self, rows, dt, op: bool) -> None:
        self.clock[rows] += dt
        if op:
            self.op_time[rows] += dt
        else:
            self.probe_time[rows] += dt
        self.dbz[rows] = bath_mod.step_values(self.dbz[rows], dt, self.env.bath, self.rng)

    def _log(self, rows, mode, bits, estimate, herald, attempts) -> None:
        if not self.record or 0 not in rows:
            return
        i = int(np.flatnonzero(rows == 0)[0])
        self.records.append(
            LoopRecord(
                shot=int(self.shot[0]),
                t_us=float(self.clock[0]),
                mode=mode,
                outcome=int(bits[i]),
                estimate_mhz=float(estimate[i]),
                herald=bool(herald),
                init_attempts=int(attempts[i]),
            )
        )

    def run_probe(self) -> np.ndarray:
        """One probe step on every row; returns the argmax estimates."""
        env, cfg = self.env, self.probe_cfg
        rows = np.arange(self.n_runs)
        self.estimator.reset()
        for k in range(1, cfg.n_shots + 1):
            attempts, false_init = _draw_inits(env, env.init_success_prob, self.n_runs, self.rng)
            t_k = k * cfg.tau_step
            p_t0 = larmor_flip_prob(self.dbz, t_k)
            labels = self._labels(np.atleast_1d(p_t0), false_init)
            bits = single_shots(labels, env.model, env.readout, self.rng, env.readout_mode)
            self.estimator.update(k, bits)
            self.shot += 1
            self._advance(rows, env.timing.probe_shot(attempts, t_k), op=False)
            if self.record:
                self._log(rows, "probe", bits, self.estimator.estimates(), False, attempts)
        return self.estimator.estimates()

    def run_ops(self, rows, n_shots: int, p_t0_fn, evolution_us_fn, estimate, mode: str = "op"):
        """Operation shots on ``rows``; ``p_t0_fn(dbz, index)`` gives the
        triplet probability and ``evolution_us_fn(index)`` the pulse length."""
        env = self.env
        rows = np.asarray(rows, dtype=np.intp)
        bits_out = np.empty((n_shots, rows.size), dtype=np.int8)
        if rows.size == 0:
            return bits_out, np.empty((n_shots, 0), dtype=np.int64)
        index_out = np.empty((n_shots, rows.size), dtype=np.int64)
        for i in range(n_shots):
            index = self.op_counter + np.arange(rows.size)
            self.op_counter += rows.size
            attempts, false_init = _draw_inits(env, env.init_success_prob, rows.size, self.rng)
            p_t0 = np.clip(np.atleast_1d(p_t0_fn(self.dbz[rows], index)), 0.0, 1.0)
            labels = self._labels(p_t0, false_init)
            bits = single_shots(labels, env.model, env.readout, self.rng, env.readout_mode)
            bits_out[i], index_out[i] = bits, index
            self.shot[rows] += 1
            self._advance(rows, env.timing.op_shot(attempts, evolution_us_fn(index)), op=True)
            if self.record:
                self._log(rows, mode, bits, estimate, True, attempts)
        return bits_out, index_out

    def duty_cycle(self) -> np.ndarray:
        return np.divide(self.op_time, self.clock, out=np.zeros_like(self.clock), where=self.clock > 0)


def _experiment_fns(experiment: Experiment):
    cache = {}

    def p_t0(dbz, index):
        op = experiment(dbz, index)
        cache["tau"] = np.broadcast_to(np.asarray(op.tau_ns, dtype=float), np.shape(index))
        if op.mode == "larmor":
            return larmor_flip_prob(dbz, cache["tau"])
        if op.mode == "exchange":
            return exchange_flip_prob(op.j_exchange, dbz, cache["tau"])
        raise ValueError(f"unknown operation mode {op.mode!r}")

    def evolution_us(index):
        return cache["tau"] / NS_PER_US

    return p_t0, evolution_us


# --- scalar entry points --------------------------------------------------


class ProbeResult(NamedTuple):
    estimate: float
    posterior: Posterior
    records: list[LoopRecord]
    bath: BathState


def probe_step(
    bath_state: BathState, env: Environment, cfg: ProbeConfig, rng: np.random.Generator
) -> ProbeResult:
    """Run ``cfg.n_shots`` Larmor shots with sequential Bayesian updates."""
    engine = LoopEngine(env, cfg, [bath_state.delta_bz], rng, record=True)
    est = float(engine.run_probe()[0])
    if isinstance(engine.estimator, FixedPointEstimator):
        w = engine.estimator.state.weights[0].astype(float)
    else:
        w = engine.estimator.weights[0].copy()
    posterior = Posterior(env.grid, w / w.sum(), bool(engine.estimator.degenerate[0]))
    new_bath = BathState(float(engine.dbz[0]), bath_state.elapsed + float(engine.clock[0]))
    return ProbeResult(est, posterior, engine.records, new_bath)


@dataclass
class HeraldResult:
    estimates: list[float]
    accepted: list[bool]
    op_data: list[tuple[int, float, float, int]]  # (op index, tau_ns, true dbz, bit)
    duty_cycle: float
    records: list[LoopRecord]
    bath: BathState


def heralded_run(
    bath_state: BathState,
    env: Environment,
    probe_cfg: ProbeConfig,
    herald_cfg: HeraldConfig,
    experiment: Experiment,
    rng: np.random.Generator,
    n_probes: int = 100,
) -> HeraldResult:
    """Probe repeatedly; operate only after estimates inside the tolerance."""
    engine = LoopEngine(env, probe_cfg, [bath_state.delta_bz], rng, record=True)
    p_fn, evo_fn = _experiment_fns(experiment)
    estimates, accepted, op_data = [], [], []
    for _ in range(n_probes):
        est = engine.run_probe()
        ok = abs(float(est[0]) - herald_cfg.target) <= herald_cfg.tolerance
        estimates.append(float(est[0]))
        accepted.append(ok)
        if ok:
            truth, taus = [], []

            def traced_p(dbz, index):
                truth.append(float(dbz[0]))
                return p_fn(dbz, index)

            def traced_evo(index):
                evo = evo_fn(index)
                taus.append(float(evo[0]) * NS_PER_US)
                return evo

            bits, index = engine.run_ops([0], herald_cfg.op_shots, traced_p, traced_evo, est[[0]])
            op_data.extend(zip(index[:, 0].tolist(), taus, truth, bits[:, 0].tolist()))
    return HeraldResult(
        estimates=estimates,
        accepted=accepted,
        op_data=op_data,
        duty_cycle=float(engine.duty_cycle()[0]),
        records=engine.records,
        bath=BathState(float(engine.dbz[0]), bath_state.elapsed + float(engine.clock[0])),
    )


@dataclass(frozen=True)
class DriveTemplate:
    """Feedback-mode Rabi pulse: fixed Rabi frequency/decay, a list of pulse
    durations (us) cycled over the operation shots, and a user detuning."""

    f_rabi: float = 6.05
    t_rabi_decay: float = 1.71
    durations: tuple[float, ...] = (1.0 / (2 * 6.05),)
    detuning: float = 0.0
    op_shots: int = 20


@dataclass
class FeedbackData:
    cycle: np.ndarray
    f_drive: np.ndarray
    true_dbz: np.ndarray
    duration: np.ndarray
    bits: np.ndarray
    estimates: np.ndarray

    @property
    def detuning(self) -> np.ndarray:
        return self.f_drive - self.true_dbz


def _feedback_batch(engine: LoopEngine, template: DriveTemplate, n_cycles: int) -> FeedbackData:
    grid = engine.env.grid
    leak = engine.env.leakage
    durations = np.asarray(template.durations, dtype=float)
    drive = RabiDriveParams(0.0, template.f_rabi, template.t_rabi_decay, 0.0)
    cols = {k: [] for k in ("cycle", "f_drive", "true_dbz", "duration", "bits", "estimates")}
    for cycle in range(n_cycles):
        est = engine.run_probe()
        f_drive = np.array([decode_frequency(quantize_frequency(e, grid).code, grid) for e in est])
        f_drive = f_drive + template.detuning
        rows = np.arange(engine.n_runs)
        start = engine.op_counter
        truth = []

        def slot(index):
            # pulse durations continue round-robin from one cycle to the next
            return (cycle * template.op_shots + (index - start) // engine.n_runs) % durations.size

        def p_fn(dbz, index):
            truth.append(dbz.copy())
            # rabi_prob depends on f_drive - dbz only
            p = rabi_prob(drive, dbz - f_drive, durations[slot(index)])
            return (1.0 - leak) * p + leak * 0.5

        def evo_fn(index):
            return durations[slot(index)]

        bits, index = engine.run_ops(rows, template.op_shots, p_fn, evo_fn, est)
        cols["cycle"].append(np.full(bits.shape, cycle))
        cols["f_drive"].append(np.broadcast_to(f_drive, bits.shape))
        cols["true_dbz"].append(np.array(truth))
        cols["duration"].append(durations[slot(index)])
        cols["bits"].append(bits)
        cols["estimates"].append(np.broadcast_to(est, bits.shape))
    return FeedbackData(**{k: np.concatenate(v, axis=0) for k, v in cols.items()})


def feedback_run(
    bath_state: BathState,
    env: Environment,
    probe_cfg: ProbeConfig,
    drive_template: DriveTemplate,
    rng: np.random.Generator,
    n_cycles: int = 1,
) -> tuple[FeedbackData, list[LoopRecord]]:
    """Probe, then drive Rabi pulses at the 9-bit quantized estimate plus the
    template detuning. Arrays are (shots, runs) with a single run here."""
    engine = LoopEngine(env, probe_cfg, [bath_state.delta_bz], rng, record=True)
    data = _feedback_batch(engine, drive_template, n_cycles)
    return data, engine.records


def feedback_batch(
    env: Environment,
    probe_cfg: ProbeConfig,
    drive_template: DriveTemplate,
    start,
    rng: np.random.Generator,
    n_cycles: int = 1,
) -> FeedbackData:
    engine = LoopEngine(env, probe_cfg, start, rng)
    return _feedback_batch(engine, drive_template, n_cycles)


# --- dataset builders -------------------------------------------------------


@dataclass
class LarmorDataset:
    tau_ns: np.ndarray
    p1: np.ndarray
    counts: np.ndarray
    ones: np.ndarray
    n_probes: int
    n_accepted: int
    duty_cycle: float
    residuals: np.ndarray = field(default_factory=lambda: np.empty(0))  # true dbz - target at op shots


def simulate_heralded_dataset(
    env: Environment,
    probe_cfg: ProbeConfig,
    herald_cfg: HeraldConfig,
    n_points: int,
    reps: int,
    p_t0_fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
    evolution_us_fn: Callable[[np.ndarray], np.ndarray],
    rng: np.random.Generator,
    n_parallel: int = 64,
    max_rounds: int = 100_000,
):
    """Heralded dataset over ``n_points`` operation settings.

    Rows start from the bath ensemble and probe in lock step. Every accepted
    probe contributes ``op_shots`` consecutive settings (round-robin over
    ``0..n_points-1``) until each setting has ``reps`` shots. The callbacks
    receive the true gradient and the setting index.

    Returns (ones, counts, n_probes, n_accepted, duty_cycle, residuals).
    """
    need = reps * n_points
    start = bath_mod.ensemble_sample(env.bath, env.sigma_ensemble, rng, size=n_parallel)
    engine = LoopEngine(env, probe_cfg, start, rng)
    ones = np.zeros(n_points)
    counts = np.zeros(n_points)
    residuals = []
    n_probes = n_accepted = 0

    def p_fn(dbz, index):
        residuals.append(dbz - herald_cfg.target)
        return p_t0_fn(dbz, index % n_points)

    def evo_fn(index):
        return evolution_us_fn(index % n_points)

    for _ in range(max_rounds):
        if engine.op_counter >= need:
            break
        est = engine.run_probe()
        n_probes += engine.n_runs
        rows = np.flatnonzero(np.abs(est - herald_cfg.target) <= herald_cfg.tolerance)
        n_accepted += rows.size
        bits, index = engine.run_ops(rows, herald_cfg.op_shots, p_fn, evo_fn, est[rows])
        slot = index.ravel() % n_points
        keep = index.ravel() < need
        np.add.at(ones, slot[keep], bits.ravel()[keep])
        np.add.at(counts, slot[keep], 1)
    duty = float(engine.op_time.sum() / engine.clock.sum())
    res = np.concatenate(residuals) if residuals else np.empty(0)
    return ones, counts, n_probes, n_accepted, duty, res


def simulate_larmor_dataset(
    env: Environment,
    probe_cfg: ProbeConfig,
    herald_cfg: HeraldConfig,
    tau_grid,
    reps: int,
    rng: np.random.Generator,
    n_parallel: int = 64,
    max_rounds: int = 100_000,
) -> LarmorDataset:
    """Heralded triplet-return probability versus Larmor evolution time."""
    tau_grid = np.asarray(tau_grid, dtype=float)
    ones, counts, n_probes, n_accepted, duty, res = simulate_heralded_dataset(
        env,
        probe_cfg,
        herald_cfg,
        tau_grid.size,
        reps,
        lambda dbz, slot: larmor_flip_prob(dbz, tau_grid[slot]),
        lambda slot: tau_grid[slot] / NS_PER_US,
        rng,
        n_parallel,
        max_rounds,
    )
    p1 = np.divide(ones, counts, out=np.full_like(ones, np.nan), where=counts > 0)
    return LarmorDataset(tau_grid, p1, counts, ones, n_probes, n_accepted, duty, res)


def heralded_duty_cycles(
    env: Environment,
    probe_cfg: ProbeConfig,
    herald_cfg: HeraldConfig,
    n_runs: int,
    n_probes: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Duty cycle of ``n_runs`` independent heralded runs of ``n_probes``
    probes each, started from the bath ensemble."""
    start = bath_mod.ensemble_sample(env.bath, env.sigma_ensemble, rng, size=n_runs)
    engine = LoopEngine(env, probe_cfg, start, rng)
    for _ in range(n_probes):
        est = engine.run_probe()
        rows = np.flatnonzero(np.abs(est - herald_cfg.target) <= herald_cfg.tolerance)
        engine.run_ops(rows, herald_cfg.op_shots, lambda d, i: np.zeros(d.shape), lambda i: np.zeros(i.shape), est[rows])
    return engine.duty_cycle()


def probe_series(
    env: Environment,
    probe_cfg: ProbeConfig,
    start,
    n_probes: int,
    rng: np.random.Generator,
):
    """Back-to-back probes; returns (times_us, estimates, truth) each of
    shape (runs, n_probes), sampled at the end of every probe."""
    engine = LoopEngine(env, probe_cfg, start, rng)
    times = np.empty((engine.n_runs, n_probes))
    est = np.empty_like(times)
    truth = np.empty_like(times)
    for j in range(n_probes):
        est[:, j] = engine.run_probe()
        times[:, j] = engine.clock
        truth[:, j] = engine.dbz
    return times, est, truth


def write_log_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOG_HEADER)
        for r in records:
            writer.writerow(
                [r.shot, repr(r.t_us), r.mode, r.outcome, repr(r.estimate_mhz), int(r.herald), r.init_attempts]
            )
