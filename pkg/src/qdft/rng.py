"""Deterministic random-number streams.

Every stochastic component of the package draws from a Philox
counter-based 64-bit generator.  A stream is addressed by an integer
seed plus a tuple of small integers (the "path") that names the context,
so results are reproducible across platforms and independent of
execution order.

Documented stream paths:

* ``(EVAL, k, s, j, g)`` - shot sampling during an SPSA objective
  evaluation: iteration ``k``, perturbation sign ``s`` (0 = plus,
  1 = minus), ensemble state ``j``, measurement group ``g``.
* ``(DELTA, k)`` - the SPSA Rademacher perturbation of iteration ``k``.
* ``(FINAL, j, g)`` - the measurement session at the optimized
  parameters for ensemble state ``j``, group ``g``.
* ``(INIT, r)`` - ansatz parameter initialization, restart ``r``.
* ``(POINT, p)`` - per-point seeds of a CLI sweep (point index ``p``).
"""

from __future__ import annotations

import numpy as np

EVAL = 0
DELTA = 1
FINAL = 2
INIT = 3
POINT = 4


def rng_stream(seed: int, *path: int) -> np.random.Generator:
    """Return the Philox generator for stream ``(seed; path)``."""
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(seq))
