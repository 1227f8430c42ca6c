"""Orbital solvers injected into the SCF drivers.

A solver takes the current KS matrix and returns the lowest ``n_occ``
orbital energies plus the occupation/density-matrix data the driver
needs.  ``ClassicalSolver`` diagonalizes directly; ``QuantumSolver``
maps the matrix onto ``ceil(log2 N)`` qubits and runs ensemble VQE,
either on exact expectation values or with multinomial shot noise.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .auxmap import KsMatrix, map_ks_to_aux
from .observables import build_ks_density_matrix, occupations
from .oracle import diagonalize
from .pauli import group_commuting
from .simulator import ShotBudget
from .vqe import EnsembleSpec, SpsaConfig, minimize_ensemble

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OrbitalSolveResult:
    """Output of one orbital solve inside an SCF iteration."""

    orbital_energies: np.ndarray
    occupations: np.ndarray  # per orbital, single spin block (0..1)
    density_matrix: np.ndarray | None
    diagnostics: dict


class ClassicalSolver:
    """Direct diagonalization (the O(N^3) reference path)."""

    name = "classical"
    is_sampled = False

    def solve(self, ks: KsMatrix, n_occ: int, iteration: int, need_dm: bool = False) -> OrbitalSolveResult:
        solution = diagonalize(ks)
        occupied = solution.eigenvectors[:, :n_occ]
        dm = occupied @ occupied.T if need_dm else None
        return OrbitalSolveResult(
            orbital_energies=solution.eigenvalues[:n_occ].copy(),
            occupations=np.sum(occupied**2, axis=1),
            density_matrix=dm,
            diagnostics={},
        )


@dataclass
class QuantumSolver:
    """Ensemble-VQE orbital solver on the auxiliary qubit Hamiltonian.

    ``mode`` selects exact expectation values (quasi-Newton optimizer)
    or shot sampling (SPSA).  Parameters are warm-started from the
    previous SCF iteration by default; shot streams are rooted at the
    iteration index so runs are reproducible.
    """

    mode: str = "exact"
    n_layers: int = 4
    shots: int = 10**6
    allocation: str = "per-group"
    seed: int = 0
    spsa: SpsaConfig = field(default_factory=SpsaConfig)
    warm_start: bool = True
    restarts: int = 3
    index_map: tuple[int, ...] | None = None
    padding: float | None = None
    dense_gamma: bool = False
    _last_params: np.ndarray | None = field(default=None, repr=False)

    name = "quantum"
    is_sampled = False  # overwritten in __post_init__

    def __post_init__(self):
        if self.mode not in ("exact", "sampled"):
            raise ValueError(f"unknown quantum solver mode {self.mode!r}")
        self.is_sampled = self.mode == "sampled"
        self.name = f"quantum-{self.mode}"

    def solve(self, ks: KsMatrix, n_occ: int, iteration: int, need_dm: bool = False) -> OrbitalSolveResult:
        aux = map_ks_to_aux(ks, index_map=self.index_map, padding=self.padding)
        groups = group_commuting(aux.pauli)
        log.info(
            "iteration %d: aux Hamiltonian has %d Pauli terms in %d measurement settings",
            iteration,
            aux.pauli.num_terms,
            len(groups),
        )
        spec = EnsembleSpec.default(n_occ, aux.num_qubits, self.n_layers)
        init = self._last_params if self.warm_start else None

        if self.mode == "exact":
            result = minimize_ensemble(
                spec, aux, optimizer="quasi-newton", mode="exact",
                seed=self.seed, init_params=init, restarts=self.restarts,
            )
        else:
            budget = ShotBudget(self.shots, self.allocation, self.seed, stream=(iteration,))
            result = minimize_ensemble(
                spec, aux, optimizer="spsa", mode="sampled",
                budget=budget, spsa=self.spsa, seed=self.seed + iteration, init_params=init,
            )
        self._last_params = result.params

        obs_mode = "sampled" if self.mode == "sampled" else "exact"
        occ = occupations(
            result.states, aux.n_logical, mode=obs_mode,
            sessions=result.sessions, index_map=aux.index_map,
        )
        dm = None
        if need_dm:
            # measurement sparsity: only pairs with KS-matrix weight are sampled;
            # exact amplitudes are free, so the exact path stays dense
            structure = None
            if obs_mode == "sampled" and not self.dense_gamma:
                structure = np.abs(ks.h) > 0.0
            dm = build_ks_density_matrix(
                result.states, aux.n_logical, mode=obs_mode,
                sessions=result.sessions, index_map=aux.index_map, structure=structure,
            )
        return OrbitalSolveResult(
            orbital_energies=result.orbital_energies,
            occupations=occ,
            density_matrix=dm,
            diagnostics={
                "pauli_terms": aux.pauli.num_terms,
                "measurement_groups": len(groups),
                "vqe_iterations": result.iterations,
                "vqe_evaluations": result.evaluations,
                "vqe_converged": result.converged,
            },
        )


def make_solver(name: str, **kwargs) -> ClassicalSolver | QuantumSolver:
    """Solver factory used by the CLI: classical | quantum-exact | quantum-sampled."""
    if name == "classical":
        return ClassicalSolver()
    if name == "quantum-exact":
        kwargs.pop("shots", None)
        kwargs.pop("allocation", None)
        kwargs.pop("spsa", None)
        return QuantumSolver(mode="exact", **kwargs)
    if name == "quantum-sampled":
        return QuantumSolver(mode="sampled", **kwargs)
    raise ValueError(f"unknown solver {name!r}")
