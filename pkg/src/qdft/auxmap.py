"""Mapping of an N x N one-body KS matrix onto M = ceil(log2 N) qubits.

Each basis orbital ``i`` is identified with the computational basis
state ``index_map[i]`` of the qubit register; the matrix element
``h_ij`` becomes the coefficient of ``|I><J| + |J><I|`` (``|I><I|`` on
the diagonal), so the register carries an auxiliary *interacting*
Hamiltonian whose spectrum below the padding level is exactly that of
``h``.  When N is not a power of two the unused basis states receive a
large positive diagonal padding so they never enter the low-energy
ensemble.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .pauli import PauliSum, projector_pair_to_pauli

_SYMMETRY_TOL = 1e-12

#: dense rebuilds are refused above this qubit count
MAX_DENSE_QUBITS = 12


@dataclass(frozen=True)
class KsMatrix:
    """Real symmetric one-body KS Hamiltonian plus basis metadata.

    Units are the hopping ``t`` for lattice systems and hartree for
    molecular ones; ``spin_block`` records which spin sector the matrix
    describes (``full`` means spin-orbitals, 2N-dimensional).
    """

    h: np.ndarray
    basis_labels: tuple[str, ...] = ()
    spin_block: str = "alpha"

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError("KS matrix must be square")
        if not np.all(np.isfinite(h)):
            raise ValueError("KS matrix contains non-finite entries")
        if np.max(np.abs(h - h.T), initial=0.0) > _SYMMETRY_TOL:
            raise ValueError("KS matrix is not symmetric within 1e-12")
        if self.spin_block not in ("alpha", "beta", "full"):
            raise ValueError(f"unknown spin_block {self.spin_block!r}")
        object.__setattr__(self, "h", h)
        labels = tuple(self.basis_labels) or tuple(f"orb{i}" for i in range(h.shape[0]))
        if len(labels) != h.shape[0]:
            raise ValueError("basis_labels length does not match matrix dimension")
        object.__setattr__(self, "basis_labels", labels)

    @property
    def n(self) -> int:
        return self.h.shape[0]

    def to_text(self) -> str:
        """Text format: first line N, then N rows of N reals."""
        rows = [" ".join(repr(float(x)) for x in row) for row in self.h]
        return f"{self.n}\n" + "\n".join(rows) + "\n"

    @classmethod
    def from_text(cls, text: str, **kwargs) -> "KsMatrix":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        n = int(lines[0])
        if len(lines) - 1 < n:
            raise ValueError(f"expected {n} matrix rows, found {len(lines) - 1}")
        h = np.array([[float(x) for x in lines[1 + i].split()] for i in range(n)])
        if h.shape != (n, n):
            raise ValueError("row length does not match declared dimension")
        return cls(h=h, **kwargs)


@dataclass(frozen=True)
class AuxHamiltonian:
    """Auxiliary interacting Hamiltonian on M qubits.

    ``index_map`` is the permutation of ``{0 .. 2^M - 1}`` whose first
    ``n_logical`` entries give the basis state of each orbital; the
    remaining images carry ``padding_value`` on the diagonal.
    """

    pauli: PauliSum
    n_logical: int
    padding_value: float
    index_map: tuple[int, ...]
    _dense_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def num_qubits(self) -> int:
        return self.pauli.num_qubits

    def dense(self) -> np.ndarray:
        """Cached dense rebuild (delegates to :func:`aux_to_dense`)."""
        if "dense" not in self._dense_cache:
            self._dense_cache["dense"] = aux_to_dense(self)
        return self._dense_cache["dense"]


def select_spin_block(ks_full: KsMatrix, tol: float = 1e-10) -> KsMatrix:
    """Extract the N x N spatial block of a closed-shell 2N spin-orbital matrix.

    Requires a spin-restricted structure: block-diagonal in spin with
    identical alpha and beta blocks.  Downstream occupations and
    densities then carry the factor 2 for spin.
    """
    if ks_full.spin_block != "full":
        raise ValueError("select_spin_block expects a spin-orbital (full) matrix")
    n2 = ks_full.n
    if n2 % 2:
        raise ValueError("spin-orbital matrix must have even dimension")
    n = n2 // 2
    h = ks_full.h
    alpha, beta = h[:n, :n], h[n:, n:]
    off = h[:n, n:]
    if np.max(np.abs(off), initial=0.0) > tol:
        raise ValueError("matrix is not block-diagonal in spin")
    if np.max(np.abs(alpha - beta), initial=0.0) > tol:
        raise ValueError("alpha and beta blocks differ: open-shell input not supported")
    return KsMatrix(h=alpha, basis_labels=ks_full.basis_labels[:n], spin_block="alpha")


def default_padding(h: np.ndarray) -> float:
    """Diagonal constant for spurious states: Gershgorin top + 10x width."""
    radii = np.sum(np.abs(h), axis=1) - np.abs(np.diag(h))
    upper = float(np.max(np.diag(h) + radii))
    lower = float(np.min(np.diag(h) - radii))
    return float(np.max(np.diag(h))) + 10.0 * max(upper - lower, 1.0)


def map_ks_to_aux(
    ks: KsMatrix,
    index_map: tuple[int, ...] | None = None,
    padding: float | None = None,
) -> AuxHamiltonian:
    """Build the auxiliary Hamiltonian of a KS matrix (Pauli-sum form).

    The Pauli sum is assembled entrywise from the projector-pair
    expansions, so only the nonzero entries of ``h`` contribute terms.
    Eigenvalues of the auxiliary matrix are those of ``h`` plus
    ``2^M - N`` copies of ``padding``.
    """
    n = ks.n
    if n < 2:
        raise ValueError("KS matrix must have dimension >= 2")
    m = max(1, math.ceil(math.log2(n)))
    dim = 1 << m

    if index_map is None:
        index_map = tuple(range(dim))
    else:
        index_map = tuple(int(i) for i in index_map)
        if sorted(index_map) != list(range(dim)):
            raise ValueError(f"index_map must be a permutation of 0..{dim - 1}")

    if padding is None:
        padding = default_padding(ks.h) if dim > n else 0.0
    if dim > n:
        gersh_top = float(np.max(np.diag(ks.h) + np.sum(np.abs(ks.h), axis=1) - np.abs(np.diag(ks.h))))
        if padding < gersh_top:
            warnings.warn(
                f"padding {padding} lies below the spectral upper bound {gersh_top}; "
                "spurious states may enter the low-energy ensemble",
                stacklevel=2,
            )

    terms: dict[str, complex] = {}

    def add(psum: PauliSum, scale: float):
        for label, coeff in psum:
            terms[label] = terms.get(label, 0.0) + scale * coeff

    for i in range(n):
        ii = index_map[i]
        add(projector_pair_to_pauli(ii, ii, m), ks.h[i, i])
        for j in range(i + 1, n):
            if ks.h[i, j] != 0.0:
                add(projector_pair_to_pauli(ii, index_map[j], m), ks.h[i, j])
    for p in range(n, dim):
        pp = index_map[p]
        add(projector_pair_to_pauli(pp, pp, m), padding)

    return AuxHamiltonian(
        pauli=PauliSum(terms, m).canonicalized(),
        n_logical=n,
        padding_value=float(padding),
        index_map=index_map,
    )


def aux_to_dense(aux: AuxHamiltonian) -> np.ndarray:
    """Exact dense rebuild of the Pauli sum (real symmetric)."""
    if aux.num_qubits > MAX_DENSE_QUBITS:
        raise ValueError(f"refusing dense rebuild above {MAX_DENSE_QUBITS} qubits")
    mat = aux.pauli.to_dense()
    if np.max(np.abs(mat.imag)) > 1e-10:
        raise ValueError("auxiliary Hamiltonian rebuild has an imaginary part")
    return mat.real
