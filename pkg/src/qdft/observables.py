"""Occupations, density-matrix elements and the real-space density.

Exact mode reads the quantities straight off the (real) simulated
amplitudes.  Sampled mode reconstructs them from measurement-setting
histograms through a :class:`MeasurementSession`, which caches counts
per basis so that settings already measured for the energy estimate are
reused for the density-matrix operators.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .pauli import PauliSum, group_commuting, projector_pair_to_pauli
from .rng import rng_stream
from .simulator import StateVector, empirical_expectation, rotated_probabilities

_REAL_TOL = 1e-10


class MeasurementSession:
    """Shot measurements of one prepared state with per-basis caching.

    Every distinct measurement basis is sampled exactly once with
    ``shots_per_setting`` shots (stream ``stream + (basis_index,)`` in
    first-request order); repeated requests return the cached histogram.
    """

    def __init__(
        self,
        state: StateVector,
        shots_per_setting: int,
        seed: int,
        stream: tuple[int, ...] = (),
    ):
        if shots_per_setting < 1:
            raise ValueError("shots_per_setting must be >= 1")
        self.state = state
        self.shots_per_setting = int(shots_per_setting)
        self.seed = int(seed)
        self.stream = tuple(stream)
        self._cache: dict[tuple[str, ...], dict[int, int]] = {}

    @property
    def num_settings_measured(self) -> int:
        return len(self._cache)

    def counts_for_basis(self, basis: tuple[str, ...]) -> dict[int, int]:
        basis = tuple(basis)
        if basis not in self._cache:
            probs = rotated_probabilities(self.state, basis)
            rng = rng_stream(self.seed, *self.stream, len(self._cache))
            counts = rng.multinomial(self.shots_per_setting, probs)
            self._cache[basis] = {int(i): int(c) for i, c in enumerate(counts) if c}
        return self._cache[basis]

    def expectation(self, op: PauliSum) -> float:
        """Estimate ``<op>`` from cached (or newly measured) settings."""
        op = op.canonicalized()
        value = 0.0
        for group in group_commuting(op):
            counts = self.counts_for_basis(group.basis)
            for label in group.strings:
                value += op.coefficient(label).real * empirical_expectation(label, counts)
        return value


def _orbital_slice(n_logical: int | None, dim: int, index_map: tuple[int, ...] | None) -> np.ndarray:
    n = dim if n_logical is None else n_logical
    if index_map is None:
        return np.arange(n)
    return np.asarray(index_map[:n], dtype=int)


def occupations(
    states: tuple[StateVector, ...] | list[StateVector],
    n_logical: int | None = None,
    mode: str = "exact",
    sessions: tuple[MeasurementSession, ...] | None = None,
    index_map: tuple[int, ...] | None = None,
) -> np.ndarray:
    """Per-orbital occupations ``n_I = sum_k |phi_k(I)|^2`` (pre-spin-factor).

    Padded basis states beyond ``n_logical`` are truncated.  Sampled mode
    reads Z-basis histograms from the sessions, which the energy
    estimation has typically already measured.
    """
    if not states:
        raise ValueError("need at least one state")
    dim = states[0].amplitudes.size
    sel = _orbital_slice(n_logical, dim, index_map)
    if mode == "exact":
        n_full = np.zeros(dim)
        for state in states:
            n_full += np.abs(state.amplitudes) ** 2
        return n_full[sel]
    if mode != "sampled":
        raise ValueError(f"unknown mode {mode!r}")
    if sessions is None or len(sessions) != len(states):
        raise ValueError("sampled mode needs one MeasurementSession per state")
    z_basis = ("Z",) * states[0].num_qubits
    n_full = np.zeros(dim)
    for session in sessions:
        counts = session.counts_for_basis(z_basis)
        shots = sum(counts.values())
        for outcome, c in counts.items():
            n_full[outcome] += c / shots
    return n_full[sel]


def gamma_element(
    state: StateVector,
    i: int,
    j: int,
    mode: str = "exact",
    session: MeasurementSession | None = None,
) -> float:
    """Expectation of ``|i><j| + |j><i|`` (the probability of ``|i>`` when i == j).

    For the real-algebra ansatz this equals ``2 phi(i) phi(j)``; the
    imaginary part is asserted zero rather than measured.
    """
    dim = state.amplitudes.size
    if not (0 <= i < dim and 0 <= j < dim):
        raise ValueError("basis index out of range")
    if mode == "exact":
        amps = state.real_amplitudes(_REAL_TOL)
        if i == j:
            return float(amps[i] ** 2)
        return float(2.0 * amps[i] * amps[j])
    if mode != "sampled":
        raise ValueError(f"unknown mode {mode!r}")
    if session is None:
        raise ValueError("sampled mode needs a MeasurementSession")
    op = projector_pair_to_pauli(i, j, state.num_qubits)
    value = session.expectation(op)
    return float(value if i != j else value)


def build_ks_density_matrix(
    states: tuple[StateVector, ...] | list[StateVector],
    n_logical: int | None = None,
    mode: str = "exact",
    sessions: tuple[MeasurementSession, ...] | None = None,
    index_map: tuple[int, ...] | None = None,
    structure: np.ndarray | None = None,
) -> np.ndarray:
    """Assemble ``D_IJ = sum_k phi_k(I) phi_k(J)`` from measured pieces.

    Diagonals come from the occupations, off-diagonals from halved
    gamma elements.  ``structure`` (an N x N boolean mask) restricts the
    measured off-diagonal pairs to where the KS Hamiltonian has weight;
    omitted entries are zero.  Pass ``None`` for the dense fallback.
    """
    n_occ = len(states)
    dim = states[0].amplitudes.size
    sel = _orbital_slice(n_logical, dim, index_map)
    n = sel.size
    if structure is not None and structure.shape != (n, n):
        raise ValueError("structure mask must be N x N")

    dm = np.zeros((n, n))
    dm[np.diag_indices(n)] = occupations(states, n, mode=mode, sessions=sessions, index_map=index_map)
    for a in range(n):
        for b in range(a + 1, n):
            if structure is not None and not structure[a, b]:
                continue
            acc = 0.0
            for k in range(n_occ):
                session = sessions[k] if sessions is not None else None
                acc += gamma_element(states[k], int(sel[a]), int(sel[b]), mode=mode, session=session)
            dm[a, b] = dm[b, a] = 0.5 * acc
    return dm


def realspace_density(
    density_matrix: np.ndarray,
    basis_values: np.ndarray,
    spin_factor: int = 1,
) -> np.ndarray:
    """Density on the grid: ``n(r_g) = spin_factor * sum_ij chi_i(r_g) D_ij chi_j(r_g)``."""
    basis_values = np.asarray(basis_values, dtype=float)
    density_matrix = np.asarray(density_matrix, dtype=float)
    if basis_values.ndim != 2 or basis_values.shape[1] != density_matrix.shape[0]:
        raise ValueError("basis_values must be (grid points) x N with N matching the density matrix")
    if spin_factor not in (1, 2):
        raise ValueError("spin_factor must be 1 or 2")
    return spin_factor * np.einsum("gi,ij,gj->g", basis_values, density_matrix, basis_values)


@dataclass(frozen=True)
class DensityOnGrid:
    """Density values plus grid geometry, exportable as CSV."""

    values: np.ndarray
    points: np.ndarray
    weights: np.ndarray


def export_density_csv(path, density: DensityOnGrid) -> None:
    """Write ``grid_index, x, y, z, weight, density`` rows."""
    points = np.atleast_2d(density.points)
    if points.shape[1] != 3:
        raise ValueError("grid points must be 3-dimensional")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["grid_index", "x", "y", "z", "weight", "density"])
        for g, (p, w, v) in enumerate(zip(points, density.weights, density.values)):
            writer.writerow(
                [g, f"{p[0]:.12g}", f"{p[1]:.12g}", f"{p[2]:.12g}", f"{w:.12g}", f"{v:.12g}"]
            )
