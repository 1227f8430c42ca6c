"""Classical O(N^3) reference: direct diagonalization and fully classical SCF.

Every quantum path in the package is validated against this module.  The
classical SCF is not a separate loop: it is the same driver code with
the orbital solve replaced by :func:`diagonalize` (solver injection), so
the two paths agree bit for bit except for the solve itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .auxmap import KsMatrix


@dataclass(frozen=True)
class EigenSolution:
    """Ascending eigenvalues and sign-fixed orthonormal eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def diagonalize(h: KsMatrix | np.ndarray) -> EigenSolution:
    """Symmetric eigendecomposition with a deterministic sign convention.

    Each eigenvector is flipped so its largest-magnitude component is
    positive (first index on ties), making downstream density-matrix
    comparisons reproducible.
    """
    mat = h.h if isinstance(h, KsMatrix) else np.asarray(h, dtype=float)
    if np.max(np.abs(mat - mat.T), initial=0.0) > 1e-12:
        raise ValueError("diagonalize expects a symmetric matrix")
    eigenvalues, vectors = np.linalg.eigh(mat)
    for k in range(vectors.shape[1]):
        lead = np.argmax(np.abs(vectors[:, k]))
        if vectors[lead, k] < 0:
            vectors[:, k] = -vectors[:, k]
    return EigenSolution(eigenvalues=eigenvalues, eigenvectors=vectors)


def classical_scf(problem, mixing: float = 0.4, limits=None, **kwargs):
    """Run the appropriate SCF driver with the classical orbital solver."""
    from .hubbard import HubbardSpec, run_soft_scf
    from .moldft import MolBundle, run_dft_scf
    from .solvers import ClassicalSolver

    if isinstance(problem, HubbardSpec):
        return run_soft_scf(problem, solver=ClassicalSolver(), mixing=mixing, limits=limits, **kwargs)
    if isinstance(problem, MolBundle):
        return run_dft_scf(problem, solver=ClassicalSolver(), mixing=mixing, limits=limits, **kwargs)
    raise TypeError(f"no classical SCF driver for {type(problem).__name__}")
