"""Molecular KS-DFT over an ingested integral/grid bundle.

Integrals, quadrature grid and basis values are read from a
``qdft-bundle-v1`` JSON document (see ``docs/bundle-format.md``); no
Gaussian integrals are evaluated here.  The atomic-orbital basis is
symmetrically orthonormalized (X = S^(-1/2)), the KS matrix is
``F = h_core + J[D] + V_xc[rho]`` with Slater exchange plus VWN (variant
V) correlation, and the orbital solve is injected exactly as in the
lattice driver, so the quantum and classical paths share every
functional code path.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .auxmap import KsMatrix
from .observables import realspace_density
from .oracle import diagonalize
from .scf import DivergenceMonitor, ScfLimits, ScfState
from .solvers import ClassicalSolver

log = logging.getLogger(__name__)

SCHEMA_VERSION = "qdft-bundle-v1"

# Slater exchange prefactor -(3/4)(3/pi)^(1/3)
_CX = -0.75 * (3.0 / np.pi) ** (1.0 / 3.0)

# VWN parametrization V, paramagnetic fit (hartree units)
_VWN_A = 0.0310907
_VWN_X0 = -0.10498
_VWN_B = 3.72744
_VWN_C = 12.9352

_RHO_FLOOR = 1e-14


class BundleError(ValueError):
    """Bundle validation failure; ``code`` distinguishes the violated contract."""

    code = "bundle"

    def __init__(self, message: str):
        super().__init__(f"[{self.code}] {message}")


class BundleSchemaError(BundleError):
    code = "schema"


class BundleOverlapError(BundleError):
    code = "overlap"


class BundleEriSymmetryError(BundleError):
    code = "eri"


@dataclass(frozen=True)
class MolBundle:
    """Validated molecular data: integrals, grid, basis values, references."""

    n_ao: int
    n_electrons: int
    overlap: np.ndarray
    core_hamiltonian: np.ndarray
    eri: np.ndarray
    grid_points: np.ndarray
    grid_weights: np.ndarray
    ao_values: np.ndarray
    e_nuc: float
    reference: dict | None = None
    metadata: dict | None = None

    @property
    def n_occ(self) -> int:
        return self.n_electrons // 2


@dataclass(frozen=True)
class OrthoBasis:
    """Quantities transformed into the Löwdin-orthonormalized AO basis."""

    x: np.ndarray  # S^(-1/2)
    core_hamiltonian: np.ndarray
    eri: np.ndarray
    ao_values: np.ndarray


def _require(condition: bool, exc: type[BundleError], message: str) -> None:
    if not condition:
        raise exc(message)


def load_bundle(path) -> MolBundle:
    """Load and validate a ``qdft-bundle-v1`` document.

    Violations raise :class:`BundleSchemaError`, :class:`BundleOverlapError`
    or :class:`BundleEriSymmetryError` depending on the broken contract.
    """
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise BundleSchemaError(f"cannot parse bundle {path}: {err}") from err

    _require(isinstance(raw, dict), BundleSchemaError, "top-level document must be an object")
    _require(
        raw.get("schema") == SCHEMA_VERSION,
        BundleSchemaError,
        f"unsupported schema {raw.get('schema')!r}, expected {SCHEMA_VERSION!r}",
    )
    required = [
        "n_ao", "n_electrons", "overlap", "core_hamiltonian", "eri",
        "grid_points", "grid_weights", "ao_values", "e_nuc",
    ]
    for key in required:
        _require(key in raw, BundleSchemaError, f"missing field {key!r}")

    n = int(raw["n_ao"])
    n_e = int(raw["n_electrons"])
    _require(n >= 1, BundleSchemaError, "n_ao must be positive")
    _require(n_e >= 2 and n_e % 2 == 0, BundleSchemaError, "closed-shell bundle needs an even electron count")

    def arr(key, shape):
        a = np.asarray(raw[key], dtype=float)
        _require(a.shape == shape, BundleSchemaError, f"{key} must have shape {shape}, got {a.shape}")
        _require(bool(np.all(np.isfinite(a))), BundleSchemaError, f"{key} contains non-finite values")
        return a

    overlap = arr("overlap", (n, n))
    core = arr("core_hamiltonian", (n, n))
    eri = arr("eri", (n, n, n, n))
    points = np.asarray(raw["grid_points"], dtype=float)
    _require(points.ndim == 2 and points.shape[1] == 3, BundleSchemaError, "grid_points must be G x 3")
    n_grid = points.shape[0]
    weights = arr("grid_weights", (n_grid,))
    ao_values = arr("ao_values", (n_grid, n))
    _require(bool(np.all(weights > 0)), BundleSchemaError, "grid weights must be positive")

    _require(
        float(np.max(np.abs(core - core.T), initial=0.0)) < 1e-10,
        BundleSchemaError,
        "core Hamiltonian must be symmetric",
    )
    _require(
        float(np.max(np.abs(overlap - overlap.T), initial=0.0)) < 1e-10,
        BundleOverlapError,
        "overlap must be symmetric",
    )
    _require(
        float(np.min(np.linalg.eigvalsh(overlap))) > 1e-10,
        BundleOverlapError,
        "overlap is not positive-definite",
    )
    for perm in [(1, 0, 2, 3), (0, 1, 3, 2), (2, 3, 0, 1)]:
        _require(
            float(np.max(np.abs(eri - eri.transpose(perm)))) < 1e-10,
            BundleEriSymmetryError,
            f"ERI breaks 8-fold symmetry under transpose {perm}",
        )

    reference = raw.get("reference")
    if reference is not None:
        _require(isinstance(reference, dict), BundleSchemaError, "reference must be an object")
        if "density" in reference:
            ref_density = np.asarray(reference["density"], dtype=float)
            _require(ref_density.shape == (n_grid,), BundleSchemaError, "reference density length mismatch")
            integral = float(weights @ ref_density)
            _require(
                abs(integral - n_e) < 1e-4,
                BundleSchemaError,
                f"reference density integrates to {integral}, expected {n_e}",
            )

    return MolBundle(
        n_ao=n,
        n_electrons=n_e,
        overlap=overlap,
        core_hamiltonian=core,
        eri=eri,
        grid_points=points,
        grid_weights=weights,
        ao_values=ao_values,
        e_nuc=float(raw["e_nuc"]),
        reference=reference,
        metadata=raw.get("metadata"),
    )


def write_bundle_dict(bundle: dict, path) -> None:
    """Serialize a bundle dictionary with stable formatting."""
    with open(path, "w") as fh:
        json.dump(bundle, fh, indent=1, sort_keys=True)
        fh.write("\n")


def lowdin_orthonormalize(bundle: MolBundle) -> OrthoBasis:
    """Transform integrals and grid values with X = U s^(-1/2) U^T.

    Requires the overlap's smallest eigenvalue above 1e-8; the
    transformed ERI keeps chemists' notation and 8-fold symmetry, the
    grid values become the orthonormalized basis functions.
    """
    s_eigs, u = np.linalg.eigh(bundle.overlap)
    if float(s_eigs.min()) <= 1e-8:
        raise BundleOverlapError(f"near-singular overlap: smallest eigenvalue {s_eigs.min():.3e}")
    x = u @ np.diag(1.0 / np.sqrt(s_eigs)) @ u.T
    core = x.T @ bundle.core_hamiltonian @ x
    eri = np.einsum("pa,qb,rc,sd,pqrs->abcd", x, x, x, x, bundle.eri, optimize=True)
    ao = bundle.ao_values @ x
    return OrthoBasis(x=x, core_hamiltonian=0.5 * (core + core.T), eri=eri, ao_values=ao)


def hartree_matrix(density_matrix: np.ndarray, eri: np.ndarray) -> np.ndarray:
    """Coulomb matrix ``J_pq = sum_rs D_rs (pq|rs)`` for a spin-summed D."""
    density_matrix = np.asarray(density_matrix, dtype=float)
    if density_matrix.shape != eri.shape[:2]:
        raise ValueError("density matrix and ERI dimensions disagree")
    j = np.einsum("pqrs,rs->pq", eri, density_matrix)
    return 0.5 * (j + j.T)


def slater_exchange(rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exchange energy per particle ``-(3/4)(3/pi)^(1/3) rho^(1/3)`` and potential."""
    eps = _CX * np.cbrt(rho)
    return eps, (4.0 / 3.0) * eps


def vwn_correlation(rs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """VWN(V) paramagnetic correlation energy per particle and potential."""
    x = np.sqrt(rs)
    big_x = x * x + _VWN_B * x + _VWN_C
    big_x0 = _VWN_X0 * _VWN_X0 + _VWN_B * _VWN_X0 + _VWN_C
    q = np.sqrt(4.0 * _VWN_C - _VWN_B * _VWN_B)
    atan_term = np.arctan(q / (2.0 * x + _VWN_B))
    k = _VWN_B * _VWN_X0 / big_x0

    eps = _VWN_A * (
        np.log(x * x / big_x)
        + (2.0 * _VWN_B / q) * atan_term
        - k * (np.log((x - _VWN_X0) ** 2 / big_x) + (2.0 * (_VWN_B + 2.0 * _VWN_X0) / q) * atan_term)
    )
    denom = (2.0 * x + _VWN_B) ** 2 + q * q
    deps_dx = _VWN_A * (
        2.0 / x
        - (2.0 * x + _VWN_B) / big_x
        - 4.0 * _VWN_B / denom
        - k * (2.0 / (x - _VWN_X0) - (2.0 * x + _VWN_B) / big_x - 4.0 * (_VWN_B + 2.0 * _VWN_X0) / denom)
    )
    # v_c = eps - (rs/3) d(eps)/d(rs) with d/d(rs) = d/dx / (2x)
    v = eps - (x / 6.0) * deps_dx
    return eps, v


def lda_xc_values(density: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise SVWN energy per particle and potential on a density array.

    Clamps negatives to zero; densities below the floor contribute nothing.
    """
    rho = np.clip(np.asarray(density, dtype=float), 0.0, None)
    mask = rho > _RHO_FLOOR
    eps = np.zeros_like(rho)
    v = np.zeros_like(rho)
    if np.any(mask):
        r = rho[mask]
        eps_x, v_x = slater_exchange(r)
        rs = np.cbrt(3.0 / (4.0 * np.pi * r))
        eps_c, v_c = vwn_correlation(rs)
        eps[mask] = eps_x + eps_c
        v[mask] = v_x + v_c
    return eps, v


def xc_svwn(
    density: np.ndarray, ao_values: np.ndarray, weights: np.ndarray
) -> tuple[float, np.ndarray]:
    """Spin-restricted LDA (Slater exchange + VWN correlation) on the grid.

    Returns the XC energy and the matrix ``V_xc,pq = sum_g w_g chi_p
    v_xc(rho_g) chi_q`` with ``v_xc = d(rho eps_xc)/d(rho)``.  Negative
    densities beyond -1e-10 are clamped to zero.
    """
    rho = np.clip(np.asarray(density, dtype=float), 0.0, None)
    eps, v = lda_xc_values(rho)
    e_xc = float(weights @ (rho * eps))
    weighted = ao_values * (weights * v)[:, None]
    v_xc = ao_values.T @ weighted
    return e_xc, 0.5 * (v_xc + v_xc.T)


def dft_total_energy(state: ScfState, bundle: MolBundle, ortho: OrthoBasis | None = None) -> float:
    """Total energy from the KS pieces with double-counting corrections.

    ``E0 = 2 sum eps_k - Tr(D J[D])/2 + E_xc - sum_g w_g v_xc rho_g + e_nuc``
    evaluated at the state's own (spin-summed) density matrix.
    """
    if state.density_matrix is None:
        raise ValueError("state carries no density matrix")
    ortho = ortho or lowdin_orthonormalize(bundle)
    d = state.density_matrix
    rho = np.clip(realspace_density(d, ortho.ao_values, spin_factor=1), 0.0, None)
    j = hartree_matrix(d, ortho.eri)
    eps_xc, v_xc_values = lda_xc_values(rho)
    e_xc = float(bundle.grid_weights @ (rho * eps_xc))
    band = 2.0 * float(np.sum(state.orbital_energies))
    double_count = 0.5 * float(np.sum(d * j)) + float(bundle.grid_weights @ (v_xc_values * rho))
    return band - double_count + e_xc + bundle.e_nuc


def run_dft_scf(
    bundle: MolBundle,
    solver=None,
    mixing: float = 0.4,
    limits: ScfLimits | None = None,
) -> ScfState:
    """KS-DFT self-consistency with density-matrix mixing.

    Starts from the core-Hamiltonian guess; exact solvers converge at
    ``max|dD| < limits.tol``, sampled solvers stop at the outer cap.
    """
    solver = solver or ClassicalSolver()
    limits = limits or ScfLimits()
    if not 0.0 < mixing <= 1.0:
        raise ValueError("mixing must lie in (0, 1]")
    ortho = lowdin_orthonormalize(bundle)
    n_occ = bundle.n_occ
    if n_occ > bundle.n_ao:
        raise BundleSchemaError("more occupied orbitals than basis functions")

    guess = diagonalize(ortho.core_hamiltonian)
    occ_vecs = guess.eigenvectors[:, :n_occ]
    d_in = 2.0 * occ_vecs @ occ_vecs.T

    history: list[tuple[int, float, float]] = []
    monitor = DivergenceMonitor(limits)
    max_iter = limits.max_iterations_sampled if solver.is_sampled else limits.max_iterations
    diagnostics: dict = {"solver": solver.name}
    converged = False
    d_out = d_in
    eps = guess.eigenvalues[:n_occ]
    residual = np.inf

    for iteration in range(1, max_iter + 1):
        rho = np.clip(realspace_density(d_in, ortho.ao_values, spin_factor=1), 0.0, None)
        j = hartree_matrix(d_in, ortho.eri)
        _, v_xc = xc_svwn(rho, ortho.ao_values, bundle.grid_weights)
        fock = ortho.core_hamiltonian + j + v_xc
        ks = KsMatrix(h=0.5 * (fock + fock.T), spin_block="alpha")

        solve = solver.solve(ks, n_occ, iteration, need_dm=True)
        eps = solve.orbital_energies
        d_out = 2.0 * solve.density_matrix
        residual = float(np.max(np.abs(d_out - d_in)))
        diagnostics.update(solve.diagnostics)

        snapshot = ScfState(
            occupations=np.diag(d_out).copy(),
            orbital_energies=eps,
            total_energy=0.0,
            iterations=iteration,
            residual=residual,
            converged=False,
            density_matrix=d_out,
        )
        energy = dft_total_energy(snapshot, bundle, ortho)
        history.append((iteration, residual, energy))
        log.info("DFT it %2d residual %.3e energy % .10f", iteration, residual, energy)

        if residual < limits.tol:
            converged = True
            break
        monitor.check(residual, history)
        d_in = mixing * d_out + (1.0 - mixing) * d_in

    rho_final = np.clip(realspace_density(d_out, ortho.ao_values, spin_factor=1), 0.0, None)
    state = ScfState(
        occupations=np.diag(d_out).copy(),
        orbital_energies=eps,
        total_energy=0.0,
        iterations=history[-1][0] if history else 0,
        residual=residual,
        converged=converged,
        history=tuple(history),
        density_matrix=d_out,
        grid_density=rho_final,
        diagnostics=diagnostics,
    )
    return ScfState(
        occupations=state.occupations,
        orbital_energies=state.orbital_energies,
        total_energy=dft_total_energy(state, bundle, ortho),
        iterations=state.iterations,
        residual=state.residual,
        converged=state.converged,
        history=state.history,
        density_matrix=state.density_matrix,
        grid_density=state.grid_density,
        diagnostics=state.diagnostics,
    )
