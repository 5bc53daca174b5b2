"""Counter-based random streams keyed by (seed, stream, step, kind).

Each (seed, stream, step, kind) cell gets its own Philox generator.  Inside a
cell the k-th draw belongs to the k-th edge or vertex, so two chains that read
the same cell see identical per-edge and per-vertex randomness.
"""
from __future__ import annotations

import os

import numpy as np

SEED_ENV = "SWTREE_SEED"

# draw kinds
EDGES = 0
VERTICES = 1
AUX = 2
HEATBATH = 3

_MASK64 = (1 << 64) - 1


def default_seed(fallback: int = 0) -> int:
    """Seed from the environment variable SWTREE_SEED, else ``fallback``."""
    val = os.environ.get(SEED_ENV)
    return int(val) if val not in (None, "") else fallback


def cell(seed: int, step: int, kind: int, stream: int = 0) -> np.random.Generator:
    """Generator for one (seed, stream, step, kind) cell.

    The 128-bit Philox key holds (seed, stream); the counter's two high words
    hold (kind, step), leaving the low words for draws within the cell.
    """
    key = (int(seed) & _MASK64) | ((int(stream) & _MASK64) << 64)
    counter = np.array([0, 0, int(kind) & _MASK64, int(step) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


class StepRandomness:
    """Per-step randomness shared by coupled chains."""

    def __init__(self, seed: int, step: int, stream: int = 0):
        self.seed, self.step, self.stream = int(seed), int(step), int(stream)

    def edge_uniforms(self, shape) -> np.ndarray:
        """r_e(t) in [0, 1): one per edge (trailing axis), replicas on leading axes."""
        return cell(self.seed, self.step, EDGES, self.stream).random(shape)

    def vertex_spins(self, shape, q: int) -> np.ndarray:
        """s_v(t) in {0..q-1}: one per vertex."""
        return cell(self.seed, self.step, VERTICES, self.stream).integers(0, q, shape, dtype=np.int64)

    def aux(self) -> np.random.Generator:
        """Generator for auxiliary choices (block, vertex or edge index)."""
        return cell(self.seed, self.step, AUX, self.stream)

    def heat_bath_uniforms(self, shape) -> np.ndarray:
        """One uniform per vertex (or edge) for inverse-CDF heat-bath draws."""
        return cell(self.seed, self.step, HEATBATH, self.stream).random(shape)
