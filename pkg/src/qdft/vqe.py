"""Weighted-ensemble VQE for the lowest eigenstates of an auxiliary Hamiltonian.

A single parametrized circuit acts on ``n_occ`` orthonormal initial
basis states; with strictly decreasing positive weights the minimizer of
the weighted energy sum sends state ``k`` to the ``k``-th lowest
eigenstate, so the per-state expectation values approximate the KS
orbital energies.

Two optimizer paths are provided: L-BFGS-B on exact expectation values
with parameter-shift gradients (noiseless simulation), and SPSA with the
standard power-law gain schedule for the shot-sampled objective.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize as scipy_minimize

from . import rng as rngmod
from .auxmap import AuxHamiltonian
from .pauli import PauliSum, group_commuting
from .rng import rng_stream
from .simulator import (
    AnsatzSpec,
    ShotBudget,
    StateVector,
    expectations_batch,
    run_ry_ansatz_batch,
)

_GTOL = 1e-7
_MAX_QN_ITER = 2000
_INIT_SPREAD = 0.1


def ensemble_weights(n_occ: int) -> np.ndarray:
    """Strictly decreasing weights ``w_k = (1 + n_occ - k) / (n_occ (n_occ + 1) / 2)``."""
    if n_occ < 1:
        raise ValueError("n_occ must be >= 1")
    k = np.arange(1, n_occ + 1)
    return (1 + n_occ - k) / (n_occ * (n_occ + 1) / 2)


@dataclass(frozen=True)
class EnsembleSpec:
    """Ensemble definition: state count, weights, initial states, shared ansatz."""

    n_occ: int
    weights: np.ndarray
    initial_states: tuple[int, ...]
    ansatz: AnsatzSpec

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.n_occ,):
            raise ValueError("one weight per ensemble state required")
        if np.any(np.diff(w) >= 0) or w[-1] <= 0:
            raise ValueError("weights must be strictly decreasing and positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        states = tuple(int(s) for s in self.initial_states)
        if len(states) != self.n_occ or len(set(states)) != self.n_occ:
            raise ValueError("initial states must be pairwise distinct, one per ensemble member")
        if any(not 0 <= s < (1 << self.ansatz.num_qubits) for s in states):
            raise ValueError("initial state index out of range")
        object.__setattr__(self, "initial_states", states)

    @classmethod
    def default(cls, n_occ: int, num_qubits: int, n_layers: int) -> "EnsembleSpec":
        """Paper-style defaults: weight formula and the first basis states."""
        ansatz = AnsatzSpec(num_qubits, n_layers, np.zeros(num_qubits * (n_layers + 1)))
        return cls(n_occ, ensemble_weights(n_occ), tuple(range(n_occ)), ansatz)


@dataclass(frozen=True)
class SpsaConfig:
    """Gain schedule ``a_k = a/(k+A)^alpha``, ``c_k = c/k^gamma`` and iteration caps."""

    a: float = 0.2
    c: float = 0.1
    stability: float = 50.0
    alpha: float = 0.602
    gamma: float = 0.101
    max_iterations: int = 5000
    avg_window: int = 20


@dataclass(frozen=True)
class VqeResult:
    """Optimized ensemble: parameters, per-state energies and diagnostics.

    ``orbital_energies`` are ascending; ``weight_rank_order[p]`` records
    which weight rank (0-based) produced the ``p``-th lowest energy.
    ``trace`` rows are ``(iteration, ensemble_energy, grad_norm_or_step)``.
    """

    params: np.ndarray
    orbital_energies: np.ndarray
    states: tuple[StateVector, ...]
    ensemble_energy: float
    iterations: int
    evaluations: int
    converged: bool
    weight_rank_order: tuple[int, ...]
    trace: tuple[tuple[float, float, float], ...] = ()
    sessions: tuple | None = field(default=None, compare=False)


def _as_pauli(hamiltonian: AuxHamiltonian | PauliSum) -> PauliSum:
    op = hamiltonian.pauli if isinstance(hamiltonian, AuxHamiltonian) else hamiltonian
    if not op.is_hermitian():
        raise ValueError("ensemble VQE expects a Hermitian Hamiltonian")
    return op.canonicalized()


def _ensemble_states(spec: EnsembleSpec, params: np.ndarray) -> np.ndarray:
    cols = np.repeat(params[:, None], spec.n_occ, axis=1)
    return run_ry_ansatz_batch(
        spec.ansatz.num_qubits, spec.ansatz.n_layers, cols, np.array(spec.initial_states)
    )


def _per_state_energies(spec: EnsembleSpec, params: np.ndarray, op: PauliSum) -> np.ndarray:
    return expectations_batch(_ensemble_states(spec, params), op).real


def ensemble_energy(
    spec: EnsembleSpec,
    hamiltonian: AuxHamiltonian | PauliSum,
    mode: str = "exact",
    budget: ShotBudget | None = None,
) -> float:
    """Weighted ensemble energy at the spec's current parameters."""
    op = _as_pauli(hamiltonian)
    if op.num_qubits != spec.ansatz.num_qubits:
        raise ValueError("qubit-count mismatch between ansatz and Hamiltonian")
    if mode == "exact":
        return float(spec.weights @ _per_state_energies(spec, spec.ansatz.params, op))
    if mode != "sampled":
        raise ValueError(f"unknown mode {mode!r}")
    if budget is None:
        raise ValueError("sampled mode requires a ShotBudget")
    return _sampled_ensemble_energy(spec, spec.ansatz.params, op, budget)


def _sampled_ensemble_energy(
    spec: EnsembleSpec, params: np.ndarray, op: PauliSum, budget: ShotBudget
) -> float:
    from .simulator import estimate_expectation_sampled  # local to keep the hot path explicit

    amp = _ensemble_states(spec, params)
    total = 0.0
    for j in range(spec.n_occ):
        state = StateVector(amp[:, j].astype(complex), spec.ansatz.num_qubits)
        total += spec.weights[j] * estimate_expectation_sampled(
            state, op, budget.with_stream(j)
        )
    return total


def _objective_with_gradient(spec: EnsembleSpec, op: PauliSum):
    """Exact ensemble energy and parameter-shift gradient in one batched sweep."""
    n_params = spec.ansatz.num_params
    n_states = spec.n_occ
    cols_per_state = 2 * n_params + 1
    initials = np.repeat(np.array(spec.initial_states), cols_per_state)

    def objective(params: np.ndarray) -> tuple[float, np.ndarray]:
        blocks = []
        for _ in range(n_states):
            block = np.repeat(params[:, None], cols_per_state, axis=1)
            for j in range(n_params):
                block[j, 1 + 2 * j] += 0.5 * np.pi
                block[j, 2 + 2 * j] -= 0.5 * np.pi
            blocks.append(block)
        amp = run_ry_ansatz_batch(
            spec.ansatz.num_qubits, spec.ansatz.n_layers, np.hstack(blocks), initials
        )
        energies = expectations_batch(amp, op).real.reshape(n_states, cols_per_state)
        value = float(spec.weights @ energies[:, 0])
        shifts = energies[:, 1:].reshape(n_states, n_params, 2)
        grad = spec.weights @ (0.5 * (shifts[:, :, 0] - shifts[:, :, 1]))
        return value, grad

    return objective


def _initial_params(spec: EnsembleSpec, seed: int, attempt: int) -> np.ndarray:
    rng = rng_stream(seed, rngmod.INIT, attempt)
    return rng.uniform(-_INIT_SPREAD, _INIT_SPREAD, size=spec.ansatz.num_params)


def _finalize(
    spec: EnsembleSpec,
    op: PauliSum,
    params: np.ndarray,
    ensemble_value: float,
    iterations: int,
    evaluations: int,
    converged: bool,
    trace: list[tuple[float, float, float]],
    budget: ShotBudget | None = None,
    seed: int = 0,
) -> VqeResult:
    amp = _ensemble_states(spec, params)
    states = tuple(
        StateVector(amp[:, j].astype(complex), spec.ansatz.num_qubits) for j in range(spec.n_occ)
    )
    sessions = None
    if budget is None:
        per_state = expectations_batch(amp, op).real
    else:
        from .observables import MeasurementSession

        n_groups = len(group_commuting(op))
        shots_per_setting = max(1, budget.total_shots // n_groups)
        sessions = tuple(
            MeasurementSession(
                states[j], shots_per_setting, budget.seed, budget.stream + (rngmod.FINAL, j)
            )
            for j in range(spec.n_occ)
        )
        per_state = np.array([sessions[j].expectation(op) for j in range(spec.n_occ)])
    order = np.argsort(per_state, kind="stable")
    return VqeResult(
        params=params.copy(),
        orbital_energies=per_state[order],
        states=states,
        ensemble_energy=float(ensemble_value),
        iterations=iterations,
        evaluations=evaluations,
        converged=converged,
        weight_rank_order=tuple(int(i) for i in order),
        trace=tuple(trace),
        sessions=sessions,
    )


def minimize_ensemble(
    spec: EnsembleSpec,
    hamiltonian: AuxHamiltonian | PauliSum,
    optimizer: str = "quasi-newton",
    mode: str = "exact",
    budget: ShotBudget | None = None,
    spsa: SpsaConfig | None = None,
    seed: int = 0,
    init_params: np.ndarray | None = None,
    restarts: int = 3,
) -> VqeResult:
    """Minimize the weighted ensemble energy over the shared ansatz.

    Exact mode runs L-BFGS-B with parameter-shift gradients until the
    gradient max-norm drops below 1e-7 (up to ``restarts`` perturbed
    retries, best energy kept).  Sampled mode runs SPSA and returns the
    average of the final ``avg_window`` iterates; its per-state energies
    are measured at the averaged parameters with fresh shot streams.
    """
    op = _as_pauli(hamiltonian)
    if op.num_qubits != spec.ansatz.num_qubits:
        raise ValueError("qubit-count mismatch between ansatz and Hamiltonian")
    if optimizer in ("quasi-newton", "l-bfgs-b"):
        if mode != "exact":
            raise ValueError("the quasi-Newton path requires exact mode")
        return _minimize_quasi_newton(spec, op, seed, init_params, restarts)
    if optimizer == "spsa":
        if mode != "sampled" or budget is None:
            raise ValueError("SPSA requires sampled mode with a ShotBudget")
        return _minimize_spsa(spec, op, budget, spsa or SpsaConfig(), seed, init_params)
    raise ValueError(f"unknown optimizer {optimizer!r}")


def _minimize_quasi_newton(
    spec: EnsembleSpec,
    op: PauliSum,
    seed: int,
    init_params: np.ndarray | None,
    restarts: int,
) -> VqeResult:
    objective = _objective_with_gradient(spec, op)
    best = None
    total_iterations = 0
    total_evaluations = 0

    for attempt in range(restarts + 1):
        if attempt == 0 and init_params is not None:
            x0 = np.asarray(init_params, dtype=float).copy()
        else:
            x0 = _initial_params(spec, seed, attempt)

        evaluations = 0
        trace: list[tuple[float, float, float]] = []

        def wrapped(x):
            nonlocal evaluations
            evaluations += 1
            return objective(x)

        def record(xk):
            value, grad = objective(xk)
            trace.append((float(len(trace)), value, float(np.max(np.abs(grad)))))

        res = scipy_minimize(
            wrapped,
            x0,
            jac=True,
            method="L-BFGS-B",
            callback=record,
            options={"maxiter": _MAX_QN_ITER, "gtol": _GTOL, "ftol": 1e-15},
        )
        value, grad = objective(res.x)
        converged = bool(np.max(np.abs(grad)) < _GTOL)
        total_iterations += int(res.nit)
        total_evaluations += evaluations
        candidate = (value, res.x.copy(), converged, trace)
        if best is None or value < best[0] - 1e-14:
            best = candidate
        elif converged and not best[2] and value < best[0] + 1e-10:
            best = candidate
        if best[2]:
            break

    value, params, converged, trace = best
    return _finalize(spec, op, params, value, total_iterations, total_evaluations, converged, trace)


def _minimize_spsa(
    spec: EnsembleSpec,
    op: PauliSum,
    budget: ShotBudget,
    cfg: SpsaConfig,
    seed: int,
    init_params: np.ndarray | None,
) -> VqeResult:
    n_params = spec.ansatz.num_params
    theta = (
        np.asarray(init_params, dtype=float).copy()
        if init_params is not None
        else _initial_params(spec, seed, 0)
    )
    tail: deque[np.ndarray] = deque(maxlen=cfg.avg_window)
    trace: list[tuple[float, float, float]] = []
    objective_log: list[float] = []

    for k in range(1, cfg.max_iterations + 1):
        ck = cfg.c / k**cfg.gamma
        delta = rng_stream(seed, rngmod.DELTA, k).integers(0, 2, size=n_params) * 2.0 - 1.0
        y_plus = _sampled_ensemble_energy(
            spec, theta + ck * delta, op, budget.with_stream(rngmod.EVAL, k, 0)
        )
        y_minus = _sampled_ensemble_energy(
            spec, theta - ck * delta, op, budget.with_stream(rngmod.EVAL, k, 1)
        )
        ghat = (y_plus - y_minus) / (2.0 * ck) * delta  # 1/delta_i = delta_i for Rademacher
        ak = cfg.a / (k + cfg.stability) ** cfg.alpha
        theta = theta - ak * ghat
        tail.append(theta.copy())
        objective_log.append(0.5 * (y_plus + y_minus))
        trace.append((float(k), objective_log[-1], float(ak * np.linalg.norm(ghat))))

    theta_star = np.mean(np.stack(tail), axis=0) if tail else theta
    window = min(cfg.avg_window, len(objective_log))
    head_mean = float(np.mean(objective_log[:window]))
    tail_vals = np.array(objective_log[-window:])
    converged = bool(tail_vals.mean() <= head_mean + 3.0 * tail_vals.std(ddof=0))
    return _finalize(
        spec,
        op,
        theta_star,
        float(tail_vals.mean()),
        cfg.max_iterations,
        2 * cfg.max_iterations,
        converged,
        trace,
        budget=budget,
        seed=seed,
    )


def extract_orbital_energies(
    result: VqeResult, hamiltonian: AuxHamiltonian | PauliSum
) -> np.ndarray:
    """Exact per-state expectation values of the result, sorted ascending."""
    op = _as_pauli(hamiltonian)
    amp = np.stack([s.amplitudes for s in result.states], axis=1)
    energies = expectations_batch(amp, op).real
    return np.sort(energies)


def write_trace_csv(path, trace: Sequence[tuple[float, float, float]]) -> None:
    """Optimizer trace rows ``(iteration, ensemble_energy, grad_norm_or_step)``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "ensemble_energy", "grad_norm_or_step"])
        for row in trace:
            writer.writerow([int(row[0]), f"{row[1]:.12g}", f"{row[2]:.12g}"])
