"""Biased depolarizing noise and target error sets."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Sequence

import numpy as np

from .symplectic import MAX_QUBITS, PauliString, unpack_rows

DEFAULT_MEMORY_BUDGET = 1 << 30  # bytes


class CapacityError(MemoryError):
    """The requested error set does not fit the memory budget."""


def solve_px(p_i: float, c_z: float, rtol: float = 1e-15) -> float:
    """Root of ``2x + x**c_z = 1 - p_i`` on (0, 1) by bisection."""
    if not 0.0 < p_i < 1.0:
        raise ValueError(f"p_I must lie in (0, 1), got {p_i}")
    if c_z <= 0:
        raise ValueError(f"c_Z must be positive, got {c_z}")
    target = 1.0 - p_i

    def f(v: float) -> float:
        return 2.0 * v + v**c_z - target

    lo, hi = 0.0, 1.0
    if not f(lo) < 0.0 < f(hi):
        raise ArithmeticError("no root of the normalization condition in (0, 1)")
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * lo:
            break
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class NoiseModel:
    """Single-qubit channel with ``p_X = p_Y`` and ``p_Z = p_X ** c_Z``."""

    p_i: float = 0.9
    c_z: float = 1.0

    def __post_init__(self) -> None:
        # validates the pair as a side effect
        object.__setattr__(self, "_px", solve_px(self.p_i, self.c_z))

    @property
    def p_x(self) -> float:
        return self._px  # type: ignore[attr-defined]

    @property
    def p_y(self) -> float:
        return self._px  # type: ignore[attr-defined]

    @property
    def p_z(self) -> float:
        if self.c_z == 1.0:
            return self.p_x
        return self.p_x**self.c_z

    @property
    def probs(self) -> tuple[float, float, float, float]:
        """(p_I, p_X, p_Y, p_Z)."""
        return (self.p_i, self.p_x, self.p_y, self.p_z)


def error_probability(e: PauliString, m: NoiseModel) -> float:
    wx, wy, wz = e.counts()
    w = wx + wy + wz
    return m.p_i ** (e.n - w) * m.p_x**wx * m.p_y**wy * m.p_z**wz


def effective_weight(e: PauliString, c_z: float) -> float:
    wx, wy, wz = e.counts()
    return wx + wy + c_z * wz


def count_errors(n: int, d: int, mode: str = "stabilizer") -> int:
    """Closed-form size of the target set (weights ``< d``)."""
    if mode == "stabilizer":
        return sum(3**w * comb(n, w) for w in range(d))
    if mode == "css":
        return 2 * sum(comb(n, w) for w in range(d))
    raise ValueError(f"unknown mode {mode!r}")


def memory_estimate(n: int, d: int, mode: str = "stabilizer") -> int:
    """Bytes needed to hold the target error operators.

    CSS sets share one n-byte row between X- and Z-type operators, so only
    half the closed-form count is stored; stabilizer sets need 2n bits each.
    """
    if mode == "css":
        return count_errors(n, d, "css") // 2 * n
    if mode == "stabilizer":
        return -(-count_errors(n, d, "stabilizer") * 2 * n // 8)
    raise ValueError(f"unknown mode {mode!r}")


def _counts(x: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    wx = np.bitwise_count(x & ~z).astype(np.int64)
    wy = np.bitwise_count(x & z).astype(np.int64)
    wz = np.bitwise_count(z & ~x).astype(np.int64)
    return wx, wy, wz


def probabilities(x: np.ndarray, z: np.ndarray, n: int, m: NoiseModel) -> np.ndarray:
    """Vectorized :func:`error_probability` for packed operators."""
    wx, wy, wz = _counts(x, z)
    w = wx + wy + wz
    p_i, p_x, _, p_z = m.probs
    with np.errstate(divide="ignore"):
        # X and Y share one rate, so sum their counts first to keep ties exact
        logp = (n - w) * np.log(p_i) + (wx + wy) * np.log(p_x) + wz * np.log(p_z)
    return np.exp(logp)


def effective_weights(x: np.ndarray, z: np.ndarray, c_z: float) -> np.ndarray:
    wx, wy, wz = _counts(x, z)
    return wx + wy + c_z * wz


@dataclass(frozen=True, eq=False)
class ErrorSet:
    """Target error operators with probabilities and reward weights.

    ``lambdas`` are the probabilities normalized by their maximum.
    """

    n: int
    x: np.ndarray
    z: np.ndarray
    noise: NoiseModel = field(default_factory=NoiseModel)
    mode: str = "stabilizer"
    d: int | None = None
    probabilities: np.ndarray = field(init=False)
    lambdas: np.ndarray = field(init=False)
    weights: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        if self.x.shape != self.z.shape or self.x.ndim != 1:
            raise ValueError("x and z must be 1-d arrays of equal length")
        p = probabilities(self.x, self.z, self.n, self.noise)
        object.__setattr__(self, "probabilities", p)
        object.__setattr__(self, "lambdas", p / p.max())
        object.__setattr__(self, "weights", np.bitwise_count(self.x | self.z).astype(np.int64))

    def __len__(self) -> int:
        return len(self.x)

    @classmethod
    def from_strings(
        cls, ops: Sequence[str], noise: NoiseModel | None = None, include_identity: bool = True
    ) -> "ErrorSet":
        paulis = [PauliString.from_str(s) for s in ops]
        n = paulis[0].n
        if include_identity and not any(p.is_identity() for p in paulis):
            paulis.insert(0, PauliString.identity(n))
        return cls(
            n,
            np.array([p.x for p in paulis], dtype=np.uint64),
            np.array([p.z for p in paulis], dtype=np.uint64),
            noise or NoiseModel(),
            mode="custom",
        )

    def with_noise(self, noise: NoiseModel) -> "ErrorSet":
        return ErrorSet(self.n, self.x, self.z, noise, self.mode, self.d)

    def effective_weights(self, c_z: float | None = None) -> np.ndarray:
        return effective_weights(self.x, self.z, self.noise.c_z if c_z is None else c_z)

    def lambdas_for(self, c_z: float) -> np.ndarray:
        """Reward weights under the same p_I but a different bias."""
        p = probabilities(self.x, self.z, self.n, NoiseModel(self.noise.p_i, c_z))
        return p / p.max()

    def identity_index(self) -> int:
        idx = np.flatnonzero((self.x == 0) & (self.z == 0))
        return int(idx[0]) if len(idx) else -1

    def paulis(self) -> list[PauliString]:
        return [PauliString(self.n, int(a), int(b)) for a, b in zip(self.x, self.z)]

    def strings(self) -> list[str]:
        return [str(p) for p in self.paulis()]

    def bits(self) -> np.ndarray:
        return unpack_rows(self.x, self.z, self.n)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["pauli_string", "weight", "effective_weight", "probability", "lambda"])
        eff = self.effective_weights()
        for s, wt, e, p, lam in zip(self.strings(), self.weights, eff, self.probabilities, self.lambdas):
            w.writerow([s, int(wt), repr(float(e)), repr(float(p)), repr(float(lam))])
        return buf.getvalue()


def _weight_block(n: int, w: int, letters: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """All strings of weight ``w`` whose factors are drawn from ``letters``.

    Letters are encoded 1=X, 2=Y, 3=Z.
    """
    if w == 0:
        return np.zeros(1, dtype=np.uint64), np.zeros(1, dtype=np.uint64)
    positions = np.array(list(combinations(range(n), w)), dtype=np.uint64)  # (C, w)
    lets = np.array(letters, dtype=np.uint64)
    grids = np.stack(np.meshgrid(*([lets] * w), indexing="ij"), axis=-1).reshape(-1, w)  # (L, w)
    xbit = (grids == 1) | (grids == 2)
    zbit = (grids == 2) | (grids == 3)
    shifted = np.uint64(1) << positions  # (C, w)
    x = (shifted[:, None, :] * xbit[None, :, :]).sum(axis=-1, dtype=np.uint64)
    z = (shifted[:, None, :] * zbit[None, :, :]).sum(axis=-1, dtype=np.uint64)
    return x.reshape(-1), z.reshape(-1)


def canonical_order(x: np.ndarray, z: np.ndarray, n: int) -> np.ndarray:
    """Permutation sorting by weight, then text order with I < X < Y < Z."""
    shifts = np.arange(n, dtype=np.uint64)
    xb = ((x[:, None] >> shifts) & np.uint64(1)).astype(np.uint8)
    zb = ((z[:, None] >> shifts) & np.uint64(1)).astype(np.uint8)
    # I=0, X=1, Y=2, Z=3
    digit = np.where(xb == 1, 1 + zb, 3 * zb)
    weight = np.bitwise_count(x | z)
    keys = [digit[:, i] for i in range(n - 1, -1, -1)] + [weight]
    return np.lexsort(keys)


def enumerate_paulis(n: int, max_weight: int, letters: Sequence[int] = (1, 2, 3)) -> tuple[np.ndarray, np.ndarray]:
    """Packed Pauli strings of weight ``<= max_weight`` in canonical order."""
    xs, zs = zip(*(_weight_block(n, w, letters) for w in range(min(max_weight, n) + 1)))
    x, z = np.concatenate(xs), np.concatenate(zs)
    order = canonical_order(x, z, n)
    return x[order], z[order]


def enumerate_errors(
    n: int,
    d: int,
    mode: str = "stabilizer",
    noise: NoiseModel | None = None,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> ErrorSet:
    """All Pauli strings of weight ``< d`` (CSS: pure-X and pure-Z only).

    In CSS mode the identity appears once, so the list holds one row fewer
    than the closed-form count.
    """
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if not 0 < n <= MAX_QUBITS:
        raise ValueError(f"n must lie in 1..{MAX_QUBITS}")
    need = memory_estimate(n, d, mode)
    if need > memory_budget:
        raise CapacityError(
            f"error set for n={n}, d={d} ({mode}) needs ~{need} bytes of operator storage, "
            f"budget is {memory_budget}"
        )
    if mode == "stabilizer":
        x, z = enumerate_paulis(n, d - 1)
    elif mode == "css":
        xs, zs = enumerate_paulis(n, d - 1, letters=(1,))
        zx, zz = enumerate_paulis(n, d - 1, letters=(3,))
        # drop the second identity
        x = np.concatenate([xs, zx[1:]])
        z = np.concatenate([zs, zz[1:]])
        order = canonical_order(x, z, n)
        x, z = x[order], z[order]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return ErrorSet(n, x, z, noise or NoiseModel(), mode=mode, d=d)


def weight_class_mass(es: ErrorSet) -> dict[int, float]:
    out: dict[int, float] = {}
    for w, p in zip(es.weights, es.probabilities):
        out[int(w)] = out.get(int(w), 0.0) + float(p)
    return out

