"""Pauli-string algebra on M qubits.

Conventions shared by the whole package:

* A Pauli string is a label over ``IXYZ`` with **qubit 1 leftmost**, so
  ``"XZI"`` applies X to qubit 1 and Z to qubit 2 of a 3-qubit register.
* Qubit ``mu`` holds bit ``mu - 1`` of a computational-basis index, i.e.
  qubit 1 is the least-significant bit and the basis ket labelled by the
  integer ``I`` is ``|eta_M ... eta_1>``.
* Dense matrices are written in this basis, entry ``(row, col) =
  <row|P|col>``.

The module provides the operator container (:class:`PauliSum`), the
trace-based decomposition of Hermitian matrices, the expansion of
``|I><J| + |J><I|`` into Pauli strings via per-qubit ladder operators,
and greedy qubit-wise-commuting measurement grouping.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping

import numpy as np

PAULI_CHARS = "IXYZ"

#: coefficients below this magnitude are dropped when a PauliSum is built
PRUNE_TOL = 1e-12

_HERMITICITY_TOL = 1e-12


class PauliString(str):
    """A tensor product of single-qubit Paulis, e.g. ``PauliString("XZI")``.

    Instances are plain strings (hashable, totally ordered by the
    lexicographic order over ``I < X < Y < Z``), validated on
    construction.
    """

    def __new__(cls, label: str) -> "PauliString":
        label = str(label)
        if not label or any(c not in PAULI_CHARS for c in label):
            raise ValueError(f"invalid Pauli label {label!r}: expected letters from {PAULI_CHARS!r}")
        return super().__new__(cls, label)

    @property
    def num_qubits(self) -> int:
        return len(self)

    @property
    def is_identity(self) -> bool:
        return set(self) == {"I"}

    def dense(self) -> np.ndarray:
        """Dense ``2^M x 2^M`` matrix of this string."""
        targets, phases = pauli_action(self)
        mat = np.zeros((phases.size, phases.size), dtype=complex)
        mat[targets, np.arange(phases.size)] = phases
        return mat

    def qubitwise_commutes(self, other: str) -> bool:
        return qubitwise_commutes(self, other)


def identity_label(num_qubits: int) -> PauliString:
    return PauliString("I" * num_qubits)


def qubitwise_commutes(a: str, b: str) -> bool:
    """True when on every qubit the non-identity letters of ``a``, ``b`` agree."""
    if len(a) != len(b):
        raise ValueError(f"qubit-count mismatch: {len(a)} vs {len(b)}")
    return all(ca == "I" or cb == "I" or ca == cb for ca, cb in zip(a, b))


@lru_cache(maxsize=65536)
def pauli_action(label: str) -> tuple[np.ndarray, np.ndarray]:
    """Signed-permutation form of a Pauli string.

    Returns ``(targets, phases)`` with ``P |j> = phases[j] |targets[j]>``
    for every basis index ``j``.  Phases are ``+-1`` for Z-type strings
    and pick up ``+-i`` per Y letter.  Cached; the arrays are read-only.
    """
    m = len(label)
    dim = 1 << m
    src = np.arange(dim)
    xmask = 0
    phases = np.ones(dim, dtype=complex)
    for pos, c in enumerate(label):  # pos 0 = qubit 1 = least-significant bit
        if c == "I":
            continue
        bit = (src >> pos) & 1
        if c == "X":
            xmask |= 1 << pos
        elif c == "Y":
            xmask |= 1 << pos
            phases = phases * np.where(bit, -1j, 1j)
        else:  # Z
            phases = phases * np.where(bit, -1.0, 1.0)
    targets = src ^ xmask
    targets.setflags(write=False)
    phases.setflags(write=False)
    return targets, phases


class PauliSum:
    """A weighted sum of Pauli strings on a fixed qubit count.

    Terms with ``|coefficient| <= tol`` are dropped at construction, so a
    stored PauliSum never carries numerical-noise terms.  Coefficients
    with an exactly zero imaginary part are stored as floats.  Instances
    are immutable; arithmetic returns new objects.
    """

    __slots__ = ("_terms", "num_qubits", "_group_cache", "_action_cache")

    def __init__(
        self,
        terms: Mapping[str, complex] | Iterable[tuple[str, complex]],
        num_qubits: int,
        tol: float = PRUNE_TOL,
    ):
        items = terms.items() if isinstance(terms, Mapping) else terms
        store: dict[PauliString, complex] = {}
        for label, coeff in items:
            ps = PauliString(label)
            if ps.num_qubits != num_qubits:
                raise ValueError(f"label {label!r} has {ps.num_qubits} qubits, expected {num_qubits}")
            coeff = complex(coeff) + store.get(ps, 0.0)
            if abs(coeff) <= tol:
                store.pop(ps, None)
            else:
                store[ps] = coeff.real if coeff.imag == 0.0 else coeff
        self._terms = store
        self.num_qubits = num_qubits
        self._group_cache: list | None = None
        self._action_cache: tuple[np.ndarray, np.ndarray] | None = None

    @classmethod
    def identity(cls, num_qubits: int, coeff: complex = 1.0) -> "PauliSum":
        return cls({identity_label(num_qubits): coeff}, num_qubits)

    @property
    def terms(self) -> Mapping[PauliString, complex]:
        return MappingProxyType(self._terms)

    @property
    def num_terms(self) -> int:
        return len(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[tuple[PauliString, complex]]:
        return iter(self._terms.items())

    def coefficient(self, label: str) -> complex:
        if not isinstance(label, PauliString):
            label = PauliString(label)
        return self._terms.get(label, 0.0)

    def sorted_labels(self) -> list[PauliString]:
        return sorted(self._terms)

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        return all(isinstance(c, float) or abs(c.imag) <= tol for c in self._terms.values())

    def canonicalized(self, tol: float = 1e-10) -> "PauliSum":
        """Real-coefficient form; raises if any imaginary part exceeds ``tol``."""
        if all(isinstance(c, float) for c in self._terms.values()):
            return self
        bad = {k: c for k, c in self._terms.items() if abs(complex(c).imag) > tol}
        if bad:
            raise ValueError(f"non-Hermitian PauliSum: imaginary coefficients on {sorted(bad)}")
        return PauliSum({k: complex(c).real for k, c in self._terms.items()}, self.num_qubits, tol=0.0)

    def to_dense(self) -> np.ndarray:
        dim = 1 << self.num_qubits
        mat = np.zeros((dim, dim), dtype=complex)
        cols = np.arange(dim)
        for label, coeff in self._terms.items():
            targets, phases = pauli_action(label)
            mat[targets, cols] += coeff * phases
        return mat

    def action_tensors(self) -> tuple[np.ndarray, np.ndarray]:
        """Stacked signed-permutation form over canonically sorted terms.

        Returns ``(targets, weighted)`` of shape (terms, 2^M) with
        ``weighted[t] = coeff_t * phases_t``, cached for the expectation
        hot path; summation order is fixed by the canonical term order.
        """
        if self._action_cache is None:
            labels = self.sorted_labels()
            dim = 1 << self.num_qubits
            if not labels:
                self._action_cache = (
                    np.zeros((0, dim), dtype=int),
                    np.zeros((0, dim), dtype=complex),
                )
            else:
                targets = np.stack([pauli_action(l)[0] for l in labels])
                weighted = np.stack(
                    [complex(self._terms[l]) * pauli_action(l)[1] for l in labels]
                )
                targets.setflags(write=False)
                weighted.setflags(write=False)
                self._action_cache = (targets, weighted)
        return self._action_cache

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if not isinstance(other, PauliSum):
            return NotImplemented
        if other.num_qubits != self.num_qubits:
            raise ValueError("qubit-count mismatch in PauliSum addition")
        merged = dict(self._terms)
        for label, coeff in other._terms.items():
            merged[label] = merged.get(label, 0.0) + coeff
        return PauliSum(merged, self.num_qubits)

    def __rmul__(self, scalar: complex) -> "PauliSum":
        return PauliSum({k: scalar * c for k, c in self._terms.items()}, self.num_qubits)

    def __repr__(self) -> str:
        body = ", ".join(f"{k}: {c:.6g}" for k, c in sorted(self._terms.items()))
        return f"PauliSum({self.num_qubits} qubits, {{{body}}})"

    def to_text(self) -> str:
        """Serialize as lines ``<coeff_re> <coeff_im> <string>``, canonically sorted."""
        lines = [f"{c.real!r} {c.imag!r} {label}" for label, c in sorted(self._terms.items())]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, num_qubits: int | None = None) -> "PauliSum":
        terms: list[tuple[str, complex]] = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            re_part, im_part, label = line.split()
            terms.append((label, complex(float(re_part), float(im_part))))
        if not terms:
            raise ValueError("empty PauliSum text")
        if num_qubits is None:
            num_qubits = len(terms[0][0])
        return cls(terms, num_qubits, tol=0.0)


def decompose_hermitian(matrix: np.ndarray, tol: float = PRUNE_TOL) -> PauliSum:
    """Expand a Hermitian ``2^M x 2^M`` matrix in the Pauli-string basis.

    The coefficient of string ``P`` is ``trace(P H) / 2^M``; terms with
    magnitude ``<= tol`` are dropped.  Rebuilding the dense matrix from
    the result reproduces the input up to accumulation noise.
    """
    matrix = np.asarray(matrix)
    dim = matrix.shape[0]
    if matrix.ndim != 2 or matrix.shape[1] != dim:
        raise ValueError("matrix must be square")
    m = dim.bit_length() - 1
    if dim != 1 << m:
        raise ValueError(f"dimension {dim} is not a power of two")
    if np.max(np.abs(matrix - matrix.conj().T)) > _HERMITICITY_TOL:
        raise ValueError("matrix is not Hermitian within 1e-12")

    cols = np.arange(dim)
    terms: dict[str, complex] = {}
    for letters in _iter_labels(m):
        targets, phases = pauli_action(letters)
        # trace(P H) = sum_k phases[k] * H[k, targets[k]]
        coeff = np.dot(phases, matrix[cols, targets]) / dim
        if abs(coeff) > tol:
            # Hermitian input and Hermitian strings give real coefficients
            terms[letters] = coeff.real if abs(coeff.imag) < 1e-14 else coeff
    return PauliSum(terms, m, tol=0.0)


def _iter_labels(m: int) -> Iterator[str]:
    if m == 0:
        yield ""
        return
    for rest in _iter_labels(m - 1):
        for c in PAULI_CHARS:
            yield c + rest


# single-qubit ladder pieces entering the projector expansion, keyed by
# (eta_I, eta_J): b b† = |0><0|, b = S- = |0><1|, b† = S+ = |1><0|, b†b = |1><1|
_LADDER_FACTORS: dict[tuple[int, int], tuple[tuple[str, complex], ...]] = {
    (0, 0): (("I", 0.5), ("Z", 0.5)),
    (1, 1): (("I", 0.5), ("Z", -0.5)),
    (0, 1): (("X", 0.5), ("Y", 0.5j)),
    (1, 0): (("X", 0.5), ("Y", -0.5j)),
}


def _ketbra_terms(i: int, j: int, num_qubits: int) -> dict[str, complex]:
    """Pauli expansion of the single projector ``|i><j|``."""
    partial: dict[str, complex] = {"": 1.0}
    for pos in range(num_qubits):
        eta_i = (i >> pos) & 1
        eta_j = (j >> pos) & 1
        factors = _LADDER_FACTORS[(eta_i, eta_j)]
        nxt: dict[str, complex] = {}
        for prefix, coeff in partial.items():
            for letter, fac in factors:
                nxt[prefix + letter] = nxt.get(prefix + letter, 0.0) + coeff * fac
        partial = nxt
    return partial


def projector_pair_to_pauli(i: int, j: int, num_qubits: int) -> PauliSum:
    """Pauli expansion of ``|i><j| + |j><i|`` (of ``|i><i|`` when ``i == j``).

    Built qubit by qubit from the four ladder-operator cases selected by
    the bit pairs ``(eta_mu^I, eta_mu^J)``; the result is Hermitian with
    real coefficients.
    """
    dim = 1 << num_qubits
    for idx in (i, j):
        if not 0 <= idx < dim:
            raise ValueError(f"basis index {idx} out of range for {num_qubits} qubits")
    terms = _ketbra_terms(i, j, num_qubits)
    if i != j:
        for label, coeff in _ketbra_terms(j, i, num_qubits).items():
            terms[label] = terms.get(label, 0.0) + coeff
    return PauliSum(terms, num_qubits).canonicalized()


@dataclass(frozen=True)
class MeasurementGroup:
    """Qubit-wise commuting strings measurable in one setting.

    ``basis`` assigns each qubit the rotation tag of its non-identity
    letter within the group (``Z`` where every member is the identity).
    """

    strings: tuple[PauliString, ...]
    basis: tuple[str, ...]

    def __post_init__(self):
        for a in self.strings:
            for pos, c in enumerate(a):
                if c != "I" and c != self.basis[pos]:
                    raise ValueError(f"string {a} incompatible with basis {''.join(self.basis)}")


def group_commuting(psum: PauliSum) -> list[MeasurementGroup]:
    """Partition the terms into qubit-wise commuting groups.

    Deterministic greedy first-fit over the canonically sorted strings:
    every term lands in exactly one group and all members of a group
    share a per-qubit measurement basis.  Cached per PauliSum instance.
    """
    if psum._group_cache is not None:
        return psum._group_cache
    if not psum.is_hermitian():
        raise ValueError("measurement grouping expects a Hermitian PauliSum")
    groups: list[list[PauliString]] = []
    bases: list[list[str | None]] = []
    for label in psum.sorted_labels():
        placed = False
        for members, basis in zip(groups, bases):
            if all(basis[p] is None or c == "I" or c == basis[p] for p, c in enumerate(label)):
                members.append(label)
                for p, c in enumerate(label):
                    if c != "I":
                        basis[p] = c
                placed = True
                break
        if not placed:
            groups.append([label])
            bases.append([c if c != "I" else None for c in label])
    result = [
        MeasurementGroup(tuple(members), tuple(b if b is not None else "Z" for b in basis))
        for members, basis in zip(groups, bases)
    ]
    psum._group_cache = result
    return result
