"""Site-occupation functional theory for the inhomogeneous 1D Hubbard chain.

The KS system is the one-body hopping matrix with the Hxc potential on
its diagonal; the Hxc functional is the Bethe-ansatz local density
approximation.  Its single parameter ``beta(u)`` interpolates the
homogeneous energy per site

    e(n, u) = -(2 beta / pi) sin(pi n / beta),   0 <= n <= 1,

and is fixed by requiring exactness at half filling, where the
Bethe-ansatz ground-state energy per site is

    e(1, u) = -4 int_0^inf dx J0(x) J1(x) / (x (1 + exp(u x / 2))).

Densities above half filling follow from particle-hole symmetry,
``e(n) = e(2 - n) + u (n - 1)``; the Hxc pieces subtract the
noninteracting (u = 0, beta = 2) energy.  All quantities are expressed
in units of the hopping ``t``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize, special

from .auxmap import KsMatrix
from .oracle import diagonalize
from .scf import DivergenceMonitor, ScfLimits, ScfState
from .solvers import ClassicalSolver

log = logging.getLogger(__name__)

_PI = np.pi


@dataclass(frozen=True)
class HubbardSpec:
    """Chain geometry, filling and interaction (u = U/t, potentials in units of t)."""

    n_sites: int
    n_electrons: int
    u: float
    t: float = 1.0
    v_ext: np.ndarray | None = None
    boundary: str = "antiperiodic"

    def __post_init__(self):
        if self.n_sites < 2:
            raise ValueError("need at least 2 sites")
        if self.n_electrons % 2 or not 0 < self.n_electrons <= 2 * self.n_sites:
            raise ValueError("closed-shell filling requires an even electron count within the band")
        if self.boundary not in ("antiperiodic", "periodic"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        v = np.zeros(self.n_sites) if self.v_ext is None else np.asarray(self.v_ext, dtype=float)
        if v.shape != (self.n_sites,):
            raise ValueError("v_ext must provide one potential per site")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "v_ext", v)

    @classmethod
    def ramp_chain(cls, u: float, n_sites: int = 8, n_electrons: int = 4, slope: float = 0.1) -> "HubbardSpec":
        """Benchmark geometry: linear ramp v_i = slope * (i - 1), antiperiodic ring."""
        return cls(n_sites, n_electrons, u, v_ext=slope * np.arange(n_sites))


@dataclass(frozen=True)
class HxcFunctionalOutput:
    """Per-site Hxc energy density and potential, in units of t."""

    e_hxc: float
    v_hxc: float


def _bethe_half_filling_energy(u: float) -> float:
    """Exact half-filling ground-state energy per site (units of t)."""

    def integrand(x):
        expo = 0.5 * u * x
        if expo > 700.0:  # denominator overflows; integrand is numerically zero
            return 0.0
        return special.j0(x) * special.j1(x) / (x * (1.0 + np.exp(expo)))

    # integrand envelope decays like exp(-u x / 2) / x^2
    upper = min(4000.0, 120.0 / max(u, 0.05) + 60.0)
    value, _ = integrate.quad(integrand, 0.0, upper, limit=2000, epsabs=1e-12, epsrel=1e-12)
    return -4.0 * value


@lru_cache(maxsize=None)
def balda_beta(u: float) -> float:
    """Solve -(2 beta / pi) sin(pi / beta) = e(1, u) for beta in (1, 2]."""
    u = float(u)
    if u < 0:
        raise ValueError("u must be nonnegative")
    if u == 0.0:
        return 2.0
    target = _bethe_half_filling_energy(u)

    def feq(beta):
        return -(2.0 * beta / _PI) * np.sin(_PI / beta) - target

    return float(optimize.brentq(feq, 1.0 + 1e-10, 2.0, xtol=1e-12, rtol=8.9e-16))


def _homogeneous_energy(n: float, beta: float, u: float) -> float:
    if n <= 1.0:
        return -(2.0 * beta / _PI) * np.sin(_PI * n / beta)
    return -(2.0 * beta / _PI) * np.sin(_PI * (2.0 - n) / beta) + u * (n - 1.0)


def balda_hxc(n: float, u: float) -> HxcFunctionalOutput:
    """Hxc energy density and potential at site occupation ``n``.

    ``v_hxc`` is the analytic derivative; at the n = 1 derivative
    discontinuity the value of the branch containing ``n`` is used
    (lower branch at exactly 1), a documented artifact of the functional.
    """
    if not 0.0 <= n <= 2.0:
        raise ValueError(f"site occupation {n} outside [0, 2]")
    if u < 0:
        raise ValueError("u must be nonnegative")
    if u == 0.0:
        return HxcFunctionalOutput(0.0, 0.0)
    beta = balda_beta(u)
    e_free = -(4.0 / _PI) * np.sin(_PI * n / 2.0)
    e = _homogeneous_energy(n, beta, u) - e_free
    if n <= 1.0:
        v = -2.0 * np.cos(_PI * n / beta) + 2.0 * np.cos(_PI * n / 2.0)
    else:
        v = 2.0 * np.cos(_PI * (2.0 - n) / beta) + u + 2.0 * np.cos(_PI * n / 2.0)
    return HxcFunctionalOutput(float(e), float(v))


def balda_site_arrays(n: np.ndarray, u: float) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized BALDA over a site-occupation vector; returns (e_hxc, v_hxc)."""
    out = [balda_hxc(float(x), u) for x in n]
    return np.array([o.e_hxc for o in out]), np.array([o.v_hxc for o in out])


def build_hubbard_onebody(spec: HubbardSpec, n: np.ndarray | None = None) -> KsMatrix:
    """KS hopping matrix with v_ext + v_hxc[n] on the diagonal.

    ``n`` is the spin-summed site occupation vector; passing ``None``
    omits the Hxc potential (the noninteracting initial guess).  The
    ring-closing bond carries +t for antiperiodic boundaries, -t for
    periodic ones.
    """
    size = spec.n_sites
    h = np.zeros((size, size))
    for i in range(size - 1):
        h[i, i + 1] = h[i + 1, i] = -1.0
    corner = 1.0 if spec.boundary == "antiperiodic" else -1.0
    h[0, size - 1] += corner
    h[size - 1, 0] += corner

    diag = spec.v_ext.copy()
    if n is not None and spec.u != 0.0:
        if np.any(n < -1e-9) or np.any(n > 2.0 + 1e-9):
            raise ValueError("site occupations outside [0, 2]")
        _, v_hxc = balda_site_arrays(np.clip(n, 0.0, 2.0), spec.u)
        diag = diag + v_hxc
    h[np.diag_indices(size)] = diag
    labels = tuple(f"site{i + 1}" for i in range(size))
    return KsMatrix(h=spec.t * h, basis_labels=labels, spin_block="alpha")


def soft_total_energy(state: ScfState, spec: HubbardSpec) -> float:
    """Ground-state energy from the KS pieces (site-discretized double counting).

    ``E0 = 2 sum_k eps_k + sum_i e_hxc(n_i) - sum_i v_hxc,i n_i`` with the
    factor 2 from the spin block and the state's own occupations.
    """
    n = np.clip(state.occupations, 0.0, 2.0)
    e_hxc, v_hxc = balda_site_arrays(n, spec.u)
    band = 2.0 * float(np.sum(state.orbital_energies))
    return band + spec.t * float(np.sum(e_hxc) - v_hxc @ n)


def run_soft_scf(
    spec: HubbardSpec,
    solver=None,
    mixing: float = 0.4,
    limits: ScfLimits | None = None,
) -> ScfState:
    """Drive the KS loop: one-body build, orbital solve, occupation mixing.

    The initial guess is the noninteracting solve (no Hxc potential), so
    u = 0 converges in a single iteration.  Exact solvers stop at
    ``max|dn| < limits.tol``; sampled solvers stop at the outer-iteration
    cap and report the final state.
    """
    solver = solver or ClassicalSolver()
    limits = limits or ScfLimits()
    if not 0.0 < mixing <= 1.0:
        raise ValueError("mixing must lie in (0, 1]")
    n_occ = spec.n_electrons // 2

    guess = diagonalize(build_hubbard_onebody(spec, None))
    n_in = 2.0 * np.sum(guess.eigenvectors[:, :n_occ] ** 2, axis=1)

    history: list[tuple[int, float, float]] = []
    monitor = DivergenceMonitor(limits)
    max_iter = limits.max_iterations_sampled if solver.is_sampled else limits.max_iterations
    diagnostics: dict = {"solver": solver.name}
    converged = False
    n_out = n_in
    eps = guess.eigenvalues[:n_occ]
    residual = np.inf

    for iteration in range(1, max_iter + 1):
        ks = build_hubbard_onebody(spec, n_in)
        solve = solver.solve(ks, n_occ, iteration)
        eps = solve.orbital_energies
        n_out = 2.0 * solve.occupations
        residual = float(np.max(np.abs(n_out - n_in)))
        diagnostics.update(solve.diagnostics)

        snapshot = ScfState(np.clip(n_out, 0.0, 2.0), eps, 0.0, iteration, residual, False)
        energy = soft_total_energy(snapshot, spec)
        history.append((iteration, residual, energy))
        log.info("SOFT it %2d residual %.3e energy % .10f", iteration, residual, energy)

        if residual < limits.tol:
            converged = True
            break
        monitor.check(residual, history)
        n_in = mixing * n_out + (1.0 - mixing) * n_in

    final_occ = np.clip(n_out, 0.0, 2.0)
    state = ScfState(
        occupations=final_occ,
        orbital_energies=eps,
        total_energy=0.0,
        iterations=history[-1][0] if history else 0,
        residual=residual,
        converged=converged,
        history=tuple(history),
        diagnostics=diagnostics,
    )
    return ScfState(
        occupations=state.occupations,
        orbital_energies=state.orbital_energies,
        total_energy=soft_total_energy(state, spec),
        iterations=state.iterations,
        residual=state.residual,
        converged=state.converged,
        history=state.history,
        diagnostics=state.diagnostics,
    )
