"""Throughput of the batched gate kernel on random gate streams."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .symplectic import KIND_CODE, SINGLE_QUBIT_KINDS, Tableau, apply_codes


@dataclass(frozen=True)
class BenchRow:
    n: int
    batch: int
    gates: int
    seconds: float

    @property
    def gates_per_second(self) -> float:
        """Gate applications (gates x batch) per second."""
        if self.gates == 0 or self.seconds == 0:
            return 0.0
        return self.gates * self.batch / self.seconds


def gate_stream(n: int, gates: int, batch: int, seed: int,
                kinds: tuple[str, ...] = ("H", "S", "CNOT")) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Random (kind, a, b) codes of shape ``(gates, batch)``."""
    rng = np.random.default_rng(seed)
    codes = np.array([KIND_CODE[k] for k in kinds])
    two = np.array([k not in SINGLE_QUBIT_KINDS for k in kinds])
    pick = rng.integers(len(kinds), size=(gates, batch))
    a = rng.integers(n, size=(gates, batch))
    b = (a + 1 + rng.integers(max(n - 1, 1), size=(gates, batch))) % n
    b = np.where(two[pick], b, a)
    return codes[pick], a.astype(np.uint64), b.astype(np.uint64)


def run(n: int, gates: int, batch: int, seed: int = 0, k: int = 0) -> tuple[BenchRow, np.ndarray, np.ndarray]:
    kinds, a, b = gate_stream(n, gates, batch, seed)
    t0 = Tableau.initial(n, k)
    x = np.tile(t0.x, (batch, 1))
    z = np.tile(t0.z, (batch, 1))
    start = time.perf_counter()
    for g in range(gates):
        x, z = apply_codes(x, z, kinds[g], a[g], b[g])
    return BenchRow(n, batch, gates, time.perf_counter() - start), x, z
