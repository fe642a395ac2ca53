"""Knill-Laflamme detection checks and the weighted-KL reward."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .noise import ErrorSet
from .symplectic import DimensionError, GroupReducer, Tableau, stack_tableaus, unpack_rows


def normalize_softness(softness: int | str | None) -> int | str:
    """Accepts an int >= 0, ``"exact"`` or ``"off"`` (an alias for 0)."""
    if softness is None or softness == "exact":
        return "exact"
    if softness == "off":
        return 0
    if isinstance(softness, str):
        raise ValueError(f"unknown softness {softness!r}")
    if softness < 0:
        raise ValueError("softness must be >= 0")
    return int(softness)


@dataclass(frozen=True, eq=False)
class KLReport:
    """Detection pattern of one tableau against an error set.

    ``detected[mu]`` is True when ``E_mu`` anticommutes with a generator or
    lies in the stabilizer group; ``kl_sum`` weights the misses by the
    reward weights and ``prob_sum`` by the raw probabilities.
    """

    detected: np.ndarray
    kl_sum: float
    prob_sum: float
    undetected_min_weight: float

    @property
    def undetected(self) -> np.ndarray:
        return np.flatnonzero(~self.detected)


class KLKernel:
    """Batched detection kernel for a fixed error set.

    The anticommutation test is the GF(2) product ``E . Omega . G^T``
    reduced with a row-wise OR; group membership is only tested for the
    operators that commute with every generator.
    """

    def __init__(self, errors: ErrorSet, softness: int | str = 2):
        self.errors = errors
        self.n = errors.n
        self.softness = normalize_softness(softness)
        self._ebits = errors.bits().astype(np.float32)  # (N, 2n)
        self._identity = errors.identity_index()
        self._combos: np.ndarray | None = None
        self._combo_rows = -1

    def _combo_matrix(self, r: int) -> np.ndarray:
        if self._combo_rows != r:
            s = min(int(self.softness), r)
            sel = [c for size in range(1, s + 1) for c in combinations(range(r), size)]
            m = np.zeros((len(sel), r), dtype=np.uint8)
            for i, c in enumerate(sel):
                m[i, list(c)] = 1
            self._combos, self._combo_rows = m, r
        return self._combos  # type: ignore[return-value]

    def anticommutes(self, x: np.ndarray, z: np.ndarray) -> np.ndarray:
        """(B, N) flags: operator anticommutes with at least one generator."""
        n = self.n
        g = unpack_rows(x, z, n).astype(np.float32)  # (B, r, 2n)
        omega_g = np.concatenate([g[..., n:], g[..., :n]], axis=-1)
        prod = np.matmul(self._ebits, omega_g.transpose(0, 2, 1))  # (B, N, r)
        return (prod.astype(np.int64) & 1).any(axis=-1)

    def detected(self, x: np.ndarray, z: np.ndarray) -> np.ndarray:
        """(B, N) detection flags for packed tableaus of shape (B, r)."""
        if x.ndim != 2 or x.shape != z.shape:
            raise DimensionError(f"expected (B, rows) arrays, got {x.shape} / {z.shape}")
        det = self.anticommutes(x, z)
        if self._identity >= 0:
            det[:, self._identity] = True
        if self.softness == 0 or x.shape[1] == 0:
            return det
        b_idx, mu_idx = np.nonzero(~det)
        if len(b_idx) == 0:
            return det
        ex, ez = self.errors.x[mu_idx], self.errors.z[mu_idx]
        if self.softness == "exact":
            hit = np.zeros(len(b_idx), dtype=bool)
            for b in np.unique(b_idx):
                sel = b_idx == b
                t = Tableau(self.n, self.n - x.shape[1], x[b], z[b])
                hit[sel] = GroupReducer(t).contains(ex[sel], ez[sel])
        else:
            combos = self._combo_matrix(x.shape[1])
            # subgroup elements for the affected tableaus only: (P, M)
            sx = _xor_combos(x[b_idx], combos)
            sz = _xor_combos(z[b_idx], combos)
            hit = ((sx == ex[:, None]) & (sz == ez[:, None])).any(axis=1)
        det[b_idx[hit], mu_idx[hit]] = True
        return det

    def report(self, det: np.ndarray, lambdas: np.ndarray | None = None, c_z: float | None = None) -> list[KLReport]:
        lam = self.errors.lambdas if lambdas is None else lambdas
        miss = ~det
        # row-wise reductions keep each sum independent of the batch size
        kl = np.where(miss, lam, 0.0).sum(axis=1)
        ps = np.where(miss, self.errors.probabilities, 0.0).sum(axis=1)
        eff = self.errors.effective_weights(c_z)
        out = []
        for b in range(det.shape[0]):
            w = eff[miss[b]]
            out.append(
                KLReport(
                    det[b].copy(),
                    float(kl[b]),
                    float(ps[b]),
                    float(w.min()) if len(w) else float("inf"),
                )
            )
        return out


def _xor_combos(rows: np.ndarray, combos: np.ndarray) -> np.ndarray:
    """XOR of generator subsets: rows (P, r), combos (M, r) -> (P, M)."""
    out = np.zeros((rows.shape[0], combos.shape[0]), dtype=np.uint64)
    for i in range(combos.shape[1]):
        sel = combos[:, i].astype(bool)
        out[:, sel] ^= rows[:, i : i + 1]
    return out


def _check(t: Tableau, es: ErrorSet) -> None:
    if t.n != es.n:
        raise DimensionError(f"tableau on {t.n} qubits vs error set on {es.n}")


def kl_check(t: Tableau, es: ErrorSet, softness: int | str = 2) -> KLReport:
    _check(t, es)
    kernel = KLKernel(es, softness)
    det = kernel.detected(t.x[None, :], t.z[None, :])
    return kernel.report(det)[0]


def kl_check_batched(ts: Sequence[Tableau], es: ErrorSet, softness: int | str = 2) -> list[KLReport]:
    for t in ts:
        _check(t, es)
    x, z = stack_tableaus(ts)
    kernel = KLKernel(es, softness)
    return kernel.report(kernel.detected(x, z))


def reward(report: KLReport) -> float:
    return -report.kl_sum
