"""Single-qubit randomized benchmarking with a depolarizing noise model.

Cliffords act on Bloch vectors as 3x3 rotations. The 24-element table is
generated from the primitive pulses I, X, Y, +-X/2, +-Y/2 by breadth-first
composition, keeping the shortest pulse string for each element.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from ..qubit import rotate, sample_outcome
from ..readout import ReadoutConfig, single_shots
from ..spin_model import SpinOutcomeModel
from .errors import FitError

GST_GERMS = (("I",), ("X/2",), ("Y/2",), ("X/2", "Y/2"), ("X/2", "X/2", "Y/2"))
GST_FIDUCIALS = ((), ("X/2",), ("Y/2",), ("X/2", "X/2"), ("X/2", "X/2", "X/2"), ("Y/2", "Y/2", "Y/2"))


def _rotation(axis, angle) -> np.ndarray:
    return np.column_stack([rotate(e, axis, angle) for e in np.eye(3)])


PRIMITIVES = {
    "I": np.eye(3),
    "X": _rotation([1, 0, 0], math.pi),
    "Y": _rotation([0, 1, 0], math.pi),
    "X/2": _rotation([1, 0, 0], math.pi / 2),
    "-X/2": _rotation([1, 0, 0], -math.pi / 2),
    "Y/2": _rotation([0, 1, 0], math.pi / 2),
    "-Y/2": _rotation([0, 1, 0], -math.pi / 2),
}


def _key(mat: np.ndarray) -> tuple:
    return tuple(np.rint(mat).astype(int).ravel())


def _build_cliffords():
    elements = {_key(np.eye(3)): ((), np.eye(3))}
    frontier = [((), np.eye(3))]
    while frontier:
        nxt = []
        for seq, mat in frontier:
            for name, prim in PRIMITIVES.items():
                if name == "I":
                    continue
                new = prim @ mat  # pulse applied after the existing sequence
                key = _key(new)
                if key not in elements:
                    elements[key] = (seq + (name,), np.rint(new))
                    nxt.append(elements[key])
        frontier = nxt
    ordered = sorted(elements.values(), key=lambda e: (len(e[0]), e[0]))
    return [seq for seq, _ in ordered], np.array([m for _, m in ordered])


CLIFFORD_PULSES, CLIFFORDS = _build_cliffords()
_INDEX = {_key(m): i for i, m in enumerate(CLIFFORDS)}


def clifford_index(mat: np.ndarray) -> int:
    """Table index of a Clifford rotation matrix (KeyError if not Clifford)."""
    return _INDEX[_key(mat)]


def compose(i: int, j: int) -> int:
    """Index of Clifford j applied after Clifford i."""
    return clifford_index(CLIFFORDS[j] @ CLIFFORDS[i])


def inverse(i: int) -> int:
    return clifford_index(CLIFFORDS[i].T)


@dataclass
class RBTable:
    m: np.ndarray
    p1: np.ndarray  # mean triplet-return fraction per length
    shots: np.ndarray  # shots per length
    interleaved: str | None = None


def rb_simulate(
    m_list,
    p: float,
    rng: np.random.Generator,
    reps: int = 1000,
    n_sequences: int = 20,
    interleaved: str | None = None,
    p_interleaved: float = 1.0,
    model: SpinOutcomeModel = SpinOutcomeModel(),
    readout: ReadoutConfig = ReadoutConfig(),
) -> RBTable:
    """Random Clifford sequences closed by the exact recovery Clifford.

    Each Clifford (and each interleaved primitive) is followed by the
    depolarizing map r -> p r. The recovery returns the ideal state to S;
    ``reps`` single shots per sequence are read out through ``model``.
    """
    if not 0 < p <= 1:
        raise ValueError("depolarizing parameter must lie in (0, 1]")
    m_list = np.asarray(m_list, dtype=int)
    gate = None if interleaved is None else PRIMITIVES[interleaved]
    p1 = np.empty(m_list.size)
    for a, m in enumerate(m_list):
        ones = 0
        for _ in range(n_sequences):
            idx = rng.integers(0, len(CLIFFORDS), m)
            vec = np.array([0.0, 0.0, 1.0])
            total = np.eye(3)
            for i in idx:
                vec = p * (CLIFFORDS[i] @ vec)
                total = CLIFFORDS[i] @ total
                if gate is not None:
                    vec = p_interleaved * (gate @ vec)
                    total = gate @ total
            rec = clifford_index(total.T)
            vec = p * (CLIFFORDS[rec] @ vec)
            p_t0 = float(np.clip((1.0 - vec[2]) / 2.0, 0.0, 1.0))
            labels = sample_outcome(np.full(reps, p_t0), model, rng)
            ones += int(single_shots(labels, model, readout, rng).sum())
        p1[a] = ones / (reps * n_sequences)
    return RBTable(m_list, p1, np.full(m_list.size, reps * n_sequences), interleaved)


@dataclass(frozen=True)
class RBResult:
    a: float
    p: float
    b: float
    p_stderr: float

    @property
    def f_avg(self) -> float:
        return (1.0 + self.p) / 2.0

    @property
    def f_stderr(self) -> float:
        return self.p_stderr / 2.0


def fit_rb(table: RBTable | tuple) -> RBResult:
    """Fit P1(m) = A p^m + B, binomially weighted when shot counts are known."""
    if isinstance(table, RBTable):
        m, y, shots = table.m.astype(float), table.p1, table.shots
    else:
        m, y = (np.asarray(v, dtype=float) for v in table)
        shots = None
    if m.size < 4:
        raise FitError("need at least four sequence lengths")
    if np.ptp(y) < 1e-9:
        raise FitError("data do not decay")
    if shots is None:
        sigma = np.ones_like(y)
    else:
        sigma = np.sqrt(np.clip(y * (1 - y), 0.25 / shots, None) / shots)
    order = np.argsort(m)
    b0 = float(y[order[-1]])
    a0 = float(y[order[0]] - b0)
    best = None
    for p0 in np.linspace(0.05, 0.995, 96):
        basis = np.column_stack([p0 ** m, np.ones_like(m)]) / sigma[:, None]
        coef, *_ = np.linalg.lstsq(basis, y / sigma, rcond=None)
        r = basis @ coef - y / sigma
        if best is None or r @ r < best[0]:
            best = (float(r @ r), coef[0], p0, coef[1])
    _, a0, p0, b0 = best
    sol = least_squares(
        lambda x: (x[0] * x[1] ** m + x[2] - y) / sigma,
        [a0, p0, b0],
        bounds=([-np.inf, 1e-6, -np.inf], [np.inf, 1.0, np.inf]),
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
    )
    a, p, b = sol.x
    if abs(a) < 1e-9 or p >= 1.0 - 1e-12:
        raise FitError("data do not decay")
    jac = sol.jac
    try:
        cov = np.linalg.inv(jac.T @ jac)
        if shots is None:
            cov *= float(sol.fun @ sol.fun) / max(1, m.size - 3)
        p_err = float(math.sqrt(max(cov[1, 1], 0.0)))
    except np.linalg.LinAlgError:
        p_err = math.nan
    return RBResult(float(a), float(p), float(b), p_err)


def irb_fidelity(p_gate: float, p_avg: float) -> float:
    """Interleaved gate fidelity (1 + p_gate / p_avg) / 2."""
    return (1.0 + p_gate / p_avg) / 2.0


def pi_pulse_fidelity_limit(q_rabi: float) -> float:
    """exp(-1 / (2 Q)^2) for a Gaussian-damped Rabi pi pulse."""
    if q_rabi <= 0:
        raise ValueError("q_rabi must be positive")
    if math.isinf(q_rabi):
        return 1.0
    return math.exp(-1.0 / (2.0 * q_rabi) ** 2)
