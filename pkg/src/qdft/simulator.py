"""Exact state-vector simulation of the R_y hardware-efficient ansatz.

The circuit prepares a computational basis state and applies, for each
of ``n_layers`` entangling blocks, one R_y rotation per qubit followed
by the CNOT chain ``CNOT(m, m+1)`` for ascending ``m``, and closes with
a final R_y layer.  Parameters are laid out block-major::

    params = [theta^1_1 .. theta^1_M, ..., theta^NL_1 .. theta^NL_M,
              theta^0_1 .. theta^0_M]

so the last M entries belong to the closing layer.  R_y/CNOT circuits
keep all amplitudes real; this is asserted where observables rely on it.

Shot noise is modeled by rotating into the measurement basis of a
qubit-wise commuting group and drawing the outcome histogram from a
multinomial over the exact Born probabilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .pauli import MeasurementGroup, PauliSum, group_commuting, pauli_action
from .rng import rng_stream

_NORM_TOL = 1e-10
_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class StateVector:
    """Normalized amplitudes over the 2^M computational basis states."""

    amplitudes: np.ndarray
    num_qubits: int

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        if amp.shape != (1 << self.num_qubits,):
            raise ValueError(f"expected {1 << self.num_qubits} amplitudes, got {amp.shape}")
        norm = np.linalg.norm(amp)
        if abs(norm - 1.0) > _NORM_TOL:
            raise ValueError(f"state vector norm {norm} deviates from 1 beyond 1e-10")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    def real_amplitudes(self, tol: float = 1e-10) -> np.ndarray:
        """Real part of the amplitudes; asserts the imaginary part is negligible."""
        if np.max(np.abs(self.amplitudes.imag)) > tol:
            raise ValueError("state has non-negligible imaginary amplitudes")
        return self.amplitudes.real

    def to_text(self) -> str:
        """Debug dump: one ``<index> <re> <im>`` line per basis state."""
        return "\n".join(
            f"{i} {float(a.real)!r} {float(a.imag)!r}" for i, a in enumerate(self.amplitudes)
        ) + "\n"


@dataclass(frozen=True)
class AnsatzSpec:
    """Shape of the R_y ansatz: qubit count, layer count and parameters (radians)."""

    num_qubits: int
    n_layers: int
    params: np.ndarray

    def __post_init__(self):
        params = np.atleast_1d(np.asarray(self.params, dtype=float))
        expected = self.num_qubits * (self.n_layers + 1)
        if params.shape != (expected,):
            raise ValueError(
                f"ansatz with M={self.num_qubits}, N_L={self.n_layers} needs "
                f"{expected} parameters, got {params.shape}"
            )
        params.setflags(write=False)
        object.__setattr__(self, "params", params)

    @property
    def num_params(self) -> int:
        return self.params.size

    def with_params(self, params: np.ndarray) -> "AnsatzSpec":
        return AnsatzSpec(self.num_qubits, self.n_layers, np.asarray(params, dtype=float))


@dataclass(frozen=True)
class ShotBudget:
    """Total shots per energy evaluation plus the allocation rule and RNG stream."""

    total_shots: int
    allocation: str = "per-group"
    seed: int = 0
    stream: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.total_shots < 1:
            raise ValueError("total_shots must be >= 1")
        if self.allocation not in ("per-group", "per-term"):
            raise ValueError(f"unknown allocation {self.allocation!r}")

    def with_stream(self, *path: int) -> "ShotBudget":
        return ShotBudget(self.total_shots, self.allocation, self.seed, self.stream + tuple(path))


@lru_cache(maxsize=4096)
def _bit_split(dim: int, pos: int) -> tuple[np.ndarray, np.ndarray]:
    """Basis indices with bit ``pos`` clear, and their bit-set partners."""
    idx = np.arange(dim)
    lo = idx[(idx >> pos) & 1 == 0]
    hi = lo | (1 << pos)
    lo.setflags(write=False)
    hi.setflags(write=False)
    return lo, hi


@lru_cache(maxsize=4096)
def _cnot_split(dim: int, control_pos: int, target_pos: int) -> tuple[np.ndarray, np.ndarray]:
    idx = np.arange(dim)
    sel = idx[((idx >> control_pos) & 1 == 1) & ((idx >> target_pos) & 1 == 0)]
    par = sel | (1 << target_pos)
    sel.setflags(write=False)
    par.setflags(write=False)
    return sel, par


def _apply_ry_batch(amp: np.ndarray, pos: int, thetas: np.ndarray) -> None:
    """In-place R_y on bit ``pos``; ``thetas`` has one angle per batch column."""
    lo, hi = _bit_split(amp.shape[0], pos)
    c = np.cos(0.5 * thetas)
    s = np.sin(0.5 * thetas)
    a0 = amp[lo]
    a1 = amp[hi]
    amp[lo] = c * a0 - s * a1
    amp[hi] = s * a0 + c * a1


def _apply_cnot(amp: np.ndarray, control_pos: int, target_pos: int) -> None:
    sel, par = _cnot_split(amp.shape[0], control_pos, target_pos)
    tmp = amp[sel].copy()
    amp[sel] = amp[par]
    amp[par] = tmp


def run_ry_ansatz_batch(
    num_qubits: int,
    n_layers: int,
    params: np.ndarray,
    initial_states: np.ndarray,
) -> np.ndarray:
    """Run the ansatz for a batch of parameter columns at once.

    ``params`` has shape ``(num_params, B)`` and ``initial_states`` shape
    ``(B,)``; returns real amplitudes of shape ``(2^M, B)``.  Columns are
    independent circuits, which lets one vectorized sweep evaluate all
    parameter-shift displacements of an ensemble.
    """
    params = np.asarray(params, dtype=float)
    m = num_qubits
    if params.shape[0] != m * (n_layers + 1):
        raise ValueError("parameter-count mismatch")
    batch = params.shape[1]
    initial_states = np.asarray(initial_states, dtype=int)
    if initial_states.shape != (batch,):
        raise ValueError("one initial state per batch column required")
    if np.any(initial_states < 0) or np.any(initial_states >= (1 << m)):
        raise ValueError("initial state index out of range")

    amp = np.zeros((1 << m, batch))
    amp[initial_states, np.arange(batch)] = 1.0
    for layer in range(n_layers):
        for q in range(m):
            _apply_ry_batch(amp, q, params[layer * m + q])
        for q in range(m - 1):
            _apply_cnot(amp, q, q + 1)
    for q in range(m):
        _apply_ry_batch(amp, q, params[n_layers * m + q])
    return amp


def run_ry_ansatz(spec: AnsatzSpec, initial: int) -> StateVector:
    """Prepare ``|initial>`` and apply the R_y ansatz (see module docstring)."""
    amp = run_ry_ansatz_batch(
        spec.num_qubits, spec.n_layers, spec.params[:, None], np.array([initial])
    )[:, 0]
    return StateVector(amplitudes=amp.astype(complex), num_qubits=spec.num_qubits)


def expectations_batch(amp: np.ndarray, op: PauliSum) -> np.ndarray:
    """``<psi_b|op|psi_b>`` for every column of a real or complex batch."""
    if amp.shape[0] != 1 << op.num_qubits:
        raise ValueError("dimension mismatch between state and operator")
    targets, weighted = op.action_tensors()
    if targets.shape[0] == 0:
        return np.zeros(amp.shape[1], dtype=complex)
    return np.einsum("tib,ti,ib->b", amp.conj()[targets], weighted, amp, optimize=True)


def expectation_exact(state: StateVector, op: PauliSum) -> float:
    """Exact ``<state|op|state>`` for a Hermitian operator."""
    if op.num_qubits != state.num_qubits:
        raise ValueError("qubit-count mismatch between state and operator")
    if not op.is_hermitian():
        raise ValueError("expectation value of a non-Hermitian operator")
    value = expectations_batch(state.amplitudes[:, None], op)[0]
    if abs(value.imag) > 1e-10:
        raise ValueError(f"expectation has imaginary part {value.imag}")
    return float(value.real)


def rotated_probabilities(state: StateVector | np.ndarray, basis: tuple[str, ...]) -> np.ndarray:
    """Born probabilities after rotating each qubit into its measurement basis.

    X-basis qubits get a Hadamard, Y-basis qubits S-dagger then Hadamard,
    Z-basis qubits are untouched.
    """
    amp = state.amplitudes if isinstance(state, StateVector) else np.asarray(state, dtype=complex)
    amp = amp.copy()
    dim = amp.shape[0]
    for pos, tag in enumerate(basis):
        if tag == "Z":
            continue
        lo, hi = _bit_split(dim, pos)
        if tag == "Y":
            amp[hi] *= -1j  # S-dagger
        elif tag != "X":
            raise ValueError(f"unknown basis tag {tag!r}")
        a0 = amp[lo].copy()
        amp[lo] = (a0 + amp[hi]) / _SQRT2
        amp[hi] = (a0 - amp[hi]) / _SQRT2
    probs = np.abs(amp) ** 2
    total = probs.sum()
    if abs(total - 1.0) > 1e-8:
        raise ValueError("probabilities do not normalize")
    return probs / total


def sample_group(
    state: StateVector,
    group: MeasurementGroup,
    shots: int,
    seed: int,
    stream: tuple[int, ...] = (),
) -> dict[int, int]:
    """Multinomial outcome counts for one measurement setting.

    Deterministic for a given ``(seed, stream)``; keys are basis indices
    in the rotated (measurement) basis, values are shot counts.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if not group.strings:
        raise ValueError("cannot sample an empty measurement group")
    probs = rotated_probabilities(state, group.basis)
    rng = rng_stream(seed, *stream)
    counts = rng.multinomial(shots, probs)
    return {int(i): int(c) for i, c in enumerate(counts) if c}


@lru_cache(maxsize=65536)
def _support_mask(label: str) -> int:
    mask = 0
    for pos, c in enumerate(label):
        if c != "I":
            mask |= 1 << pos
    return mask


def empirical_expectation(label: str, counts: dict[int, int]) -> float:
    """Mean Pauli eigenvalue of ``label`` under measured (rotated-basis) counts."""
    support = _support_mask(label)
    shots = sum(counts.values())
    acc = 0
    for outcome, n in counts.items():
        parity = bin(outcome & support).count("1") & 1
        acc += -n if parity else n
    return acc / shots


def allocate_shots(groups: list[MeasurementGroup], budget: ShotBudget) -> list[int]:
    """Split the budget over the measurement settings.

    ``per-group`` divides uniformly; ``per-term`` weights each setting by
    its string count (the paper's per-Pauli reading).  Floor division,
    remainder to the first settings; every setting gets at least 1 shot.
    """
    n_groups = len(groups)
    if budget.total_shots < n_groups:
        raise ValueError(f"budget of {budget.total_shots} shots cannot cover {n_groups} settings")
    if budget.allocation == "per-group":
        base, rem = divmod(budget.total_shots, n_groups)
        return [base + (1 if g < rem else 0) for g in range(n_groups)]
    n_terms = sum(len(g.strings) for g in groups)
    shots = [max(1, (budget.total_shots * len(g.strings)) // n_terms) for g in groups]
    leftover = budget.total_shots - sum(shots)
    for g in range(len(shots)):
        if leftover <= 0:
            break
        shots[g] += 1
        leftover -= 1
    return shots


def estimate_expectation_sampled(state: StateVector, op: PauliSum, budget: ShotBudget) -> float:
    """Unbiased shot-sampled estimate of ``<state|op|state>``.

    Groups the operator, allocates the budget, samples each setting once
    (stream ``budget.stream + (group_index,)``) and sums coefficient-
    weighted empirical string expectations.
    """
    op = op.canonicalized()
    groups = group_commuting(op)
    if not groups:
        raise ValueError("operator has no terms to measure")
    shots = allocate_shots(groups, budget)
    estimate = 0.0
    for g_idx, (group, n_shots) in enumerate(zip(groups, shots)):
        counts = sample_group(state, group, n_shots, budget.seed, budget.stream + (g_idx,))
        for label in group.strings:
            estimate += op.coefficient(label).real * empirical_expectation(label, counts)
    return estimate


def gradient_parameter_shift(spec: AnsatzSpec, initial: int, op: PauliSum) -> np.ndarray:
    """Exact energy gradient via the parameter-shift rule.

    Component ``j`` equals ``(E(theta_j + pi/2) - E(theta_j - pi/2)) / 2``.
    All shifted circuits are evaluated in one batched sweep.
    """
    n_params = spec.num_params
    shifts = np.repeat(spec.params[:, None], 2 * n_params, axis=1)
    for j in range(n_params):
        shifts[j, 2 * j] += 0.5 * math.pi
        shifts[j, 2 * j + 1] -= 0.5 * math.pi
    amp = run_ry_ansatz_batch(
        spec.num_qubits, spec.n_layers, shifts, np.full(2 * n_params, initial)
    )
    energies = expectations_batch(amp, op).real
    return 0.5 * (energies[0::2] - energies[1::2])
