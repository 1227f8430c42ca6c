"""Shared state and control knobs of the self-consistency loops."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ScfLimits:
    """Iteration caps and thresholds of the outer KS loop.

    Exact solves converge on the density residual; shot-sampled solves
    cannot, so they stop after ``max_iterations_sampled`` outer
    iterations and report the final state.
    """

    max_iterations: int = 100
    tol: float = 1e-8
    max_iterations_sampled: int = 20
    divergence_factor: float = 10.0
    divergence_patience: int = 5


@dataclass(frozen=True)
class ScfState:
    """Converged (or capped) result of a KS self-consistency loop."""

    occupations: np.ndarray
    orbital_energies: np.ndarray
    total_energy: float
    iterations: int
    residual: float
    converged: bool
    history: tuple[tuple[int, float, float], ...] = ()
    density_matrix: np.ndarray | None = None
    grid_density: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)


class ScfDivergenceError(RuntimeError):
    """Raised when the density residual keeps growing; carries diagnostics."""

    def __init__(self, message: str, history: tuple[tuple[int, float, float], ...]):
        super().__init__(message)
        self.history = history


class DivergenceMonitor:
    """Aborts the loop once the residual exceeds ``factor * initial`` repeatedly."""

    def __init__(self, limits: ScfLimits):
        self._limits = limits
        self._initial: float | None = None
        self._streak = 0

    def check(self, residual: float, history: list[tuple[int, float, float]]) -> None:
        if self._initial is None:
            self._initial = max(residual, 1e-12)
            return
        if residual > self._limits.divergence_factor * self._initial:
            self._streak += 1
        else:
            self._streak = 0
        if self._streak >= self._limits.divergence_patience:
            raise ScfDivergenceError(
                f"SCF diverged: residual {residual:.3e} stayed above "
                f"{self._limits.divergence_factor} x initial residual {self._initial:.3e} "
                f"for {self._streak} iterations",
                tuple(history),
            )
