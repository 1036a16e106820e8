"""Reproducible random streams for parallel Monte Carlo.

Substreams are Philox counter-based generators keyed by the master seed
plus an index, so every stream is a pure function of (master_seed,
index) and results never depend on worker scheduling. Path-level APIs
key one stream per path; batch estimation keys one stream per fixed
4096-path chunk and assigns draws to paths by row, which pins each
path's randomness to (master_seed, path_index) through the fixed chunk
size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError

DEFAULT_CHUNK_SIZE = 4096

# High bit separates the chunk-stream key domain from the path-stream
# domain so the two can never collide.
_CHUNK_DOMAIN = 1 << 63


@dataclass(frozen=True)
class StreamPlan:
    """Seed, chunk size, and worker count for one estimation run.

    ``workers`` only controls scheduling; estimates are bit-identical
    for any worker count because substreams and the reduction order
    depend on the plan alone.
    """

    master_seed: int
    chunk_size: int = DEFAULT_CHUNK_SIZE
    workers: int = 1

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ContractViolationError(
                f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}"
            )
        if self.chunk_size < 1:
            raise ContractViolationError(f"chunk_size must be >= 1, got {self.chunk_size}")
        if self.workers < 1:
            raise ContractViolationError(f"workers must be >= 1, got {self.workers}")

    def _keyed(self, word: int) -> np.random.Generator:
        key = np.array([self.master_seed, word], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def path_stream(self, path_index: int) -> np.random.Generator:
        """Independent generator for one path."""
        if not 0 <= path_index < _CHUNK_DOMAIN:
            raise ContractViolationError(f"path_index out of range: {path_index}")
        return self._keyed(path_index)

    def chunk_stream(self, chunk_index: int) -> np.random.Generator:
        """Independent generator for one fixed-size chunk of paths."""
        if not 0 <= chunk_index < _CHUNK_DOMAIN:
            raise ContractViolationError(f"chunk_index out of range: {chunk_index}")
        return self._keyed(_CHUNK_DOMAIN | chunk_index)

    def n_chunks(self, n_samples: int) -> int:
        return -(-n_samples // self.chunk_size)

    def chunk_count(self, chunk_index: int, n_samples: int) -> int:
        """Number of samples assigned to a chunk (the last may be short)."""
        start = chunk_index * self.chunk_size
        return max(0, min(self.chunk_size, n_samples - start))

    def with_workers(self, workers: int) -> "StreamPlan":
        return StreamPlan(self.master_seed, self.chunk_size, workers)
