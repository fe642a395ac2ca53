"""Code analysis: weight enumerators, families, distances and failure rates."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from math import comb, floor
from typing import Iterable, Sequence

import numpy as np

from .kl import kl_check
from .noise import NoiseModel, _weight_block, effective_weights, enumerate_errors, enumerate_paulis, probabilities
from .symplectic import DimensionError, GroupReducer, PauliString, Tableau

MAX_GROUP_BITS = 24  # 2^(n-k) group elements
MAX_EXACT_QUBITS = 11  # 4^n errors for exact failure rates
TIE_RTOL = 1e-9


def tie_key(p: np.ndarray) -> np.ndarray:
    """Log-probability quantized to relative steps of ``TIE_RTOL``."""
    return np.rint(np.log(p) / TIE_RTOL)


class BudgetError(RuntimeError):
    """Enumeration would exceed the configured budget."""


def syndromes(x: np.ndarray, z: np.ndarray, t: Tableau) -> np.ndarray:
    """Packed syndrome of each operator: bit i set when it anticommutes with row i."""
    out = np.zeros(x.shape, dtype=np.int64)
    for i, (gx, gz) in enumerate(zip(t.x, t.z)):
        par = (np.bitwise_count((x & gz) ^ (z & gx)) & 1).astype(np.int64)
        out |= par << i
    return out


# ---------------------------------------------------------------------------
# Weight enumerators


def _poly_mul(a: list[int], b: list[int]) -> list[int]:
    out = [0] * (len(a) + len(b) - 1)
    for i, u in enumerate(a):
        if u:
            for j, v in enumerate(b):
                out[i + j] += u * v
    return out


def _poly_pow(p: list[int], e: int) -> list[int]:
    out = [1]
    for _ in range(e):
        out = _poly_mul(out, p)
    return out


def macwilliams(a: Sequence[int], n: int, k: int) -> list[int]:
    """Centralizer enumerator from the group enumerator.

    With ``A(x, y) = sum_j A_j x^(n-j) y^j`` the centralizer satisfies
    ``B(x, y) = A(x + 3y, x - y) / 2^(n-k)``.  Integer arithmetic throughout.
    """
    total = [0] * (n + 1)
    for j, aj in enumerate(a):
        if not aj:
            continue
        term = _poly_mul(_poly_pow([1, 3], n - j), _poly_pow([1, -1], j))
        for i, c in enumerate(term):
            total[i] += int(aj) * c
    denom = 1 << (n - k)
    if any(c % denom for c in total):
        raise ArithmeticError("enumerator transform is not integral; the input is not a stabilizer group")
    return [c // denom for c in total]


@dataclass(frozen=True)
class CodeFingerprint:
    n: int
    k: int
    A: tuple[int, ...]
    B: tuple[int, ...]
    d: int
    degenerate: bool

    @property
    def key(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        return self.A, self.B


def group_enumerator(t: Tableau) -> list[int]:
    if t.num_rows > MAX_GROUP_BITS:
        raise BudgetError(f"2^{t.num_rows} group elements exceed the enumeration budget 2^{MAX_GROUP_BITS}")
    x, z = t.group_elements()
    return np.bincount(np.bitwise_count(x | z).astype(np.int64), minlength=t.n + 1).tolist()


def symmetric_distance(a: Sequence[int], b: Sequence[int], k: int) -> int:
    """Smallest weight with a logical operator; for ``k = 0`` the smallest
    weight of a non-identity stabilizer."""
    if k == 0:
        return next((j for j in range(1, len(a)) if a[j]), 0)
    return next(j for j in range(len(a)) if b[j] > a[j])


def weight_enumerators(t: Tableau) -> CodeFingerprint:
    a = group_enumerator(t)
    b = macwilliams(a, t.n, t.k)
    d = symmetric_distance(a, b, t.k)
    degenerate = t.k > 0 and any(a[1:d])
    return CodeFingerprint(t.n, t.k, tuple(a), tuple(b), d, bool(degenerate))


# ---------------------------------------------------------------------------
# Families


@dataclass
class Family:
    family_id: int
    A: tuple[int, ...]
    B: tuple[int, ...]
    degenerate: bool
    d: int
    codes: int = 0
    occurrences: int = 0
    min_circuit_size: int | None = None
    members: list[int] = field(default_factory=list)

    @property
    def decoupled(self) -> int:
        """Weight-one stabilizers: qubits frozen in a product state."""
        return self.A[1] if len(self.A) > 1 else 0

    @property
    def genuine(self) -> bool:
        """Every qubit takes part in the code (no weight-one stabilizer)."""
        return self.decoupled == 0


def classify_families(tableaus: Sequence[Tableau], sizes: Sequence[int | None] | None = None) -> list[Family]:
    """Group codes by their exact (A, B) pair.

    ``codes`` counts distinct stabilizer groups, ``occurrences`` counts
    inputs.  Families are numbered in increasing (A, B) order.
    """
    if not tableaus:
        return []
    n, k = tableaus[0].n, tableaus[0].k
    if any(t.n != n or t.k != k for t in tableaus):
        raise DimensionError("cannot classify codes with mixed (n, k)")
    sizes = list(sizes) if sizes is not None else [None] * len(tableaus)
    groups: dict[tuple, Family] = {}
    seen: dict[tuple, set[tuple[int, ...]]] = {}
    for i, (t, size) in enumerate(zip(tableaus, sizes)):
        fp = weight_enumerators(t)
        fam = groups.get(fp.key)
        if fam is None:
            fam = groups[fp.key] = Family(0, fp.A, fp.B, fp.degenerate, fp.d)
            seen[fp.key] = set()
        fam.occurrences += 1
        fam.members.append(i)
        span = tuple(t.rref())
        if span not in seen[fp.key]:
            seen[fp.key].add(span)
            fam.codes += 1
        if size is not None and (fam.min_circuit_size is None or size < fam.min_circuit_size):
            fam.min_circuit_size = int(size)
    out = [groups[key] for key in sorted(groups)]
    for i, fam in enumerate(out, 1):
        fam.family_id = i
    return out


def family_counts(families: Iterable[Family], genuine_only: bool = False) -> tuple[int, int]:
    """(non-degenerate, degenerate) family counts."""
    fams = [f for f in families if f.genuine or not genuine_only]
    deg = sum(f.degenerate for f in fams)
    return len(fams) - deg, deg


def _vec(v: Sequence[int]) -> str:
    return " ".join(str(int(c)) for c in v)


def family_report_csv(families: Sequence[Family]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["family_id", "A", "B", "degenerate", "count", "occurrences", "min_circuit_size", "decoupled"])
    for f in families:
        w.writerow([f.family_id, _vec(f.A), _vec(f.B), int(f.degenerate), f.codes, f.occurrences,
                    "" if f.min_circuit_size is None else f.min_circuit_size, f.decoupled])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Distance


@dataclass(frozen=True)
class DistanceResult:
    raw: float  # smallest effective weight of an undetectable operator
    d_e: int  # integer part
    witness: str


def distance(t: Tableau, c_z: float = 1.0, max_weight: int | None = None) -> DistanceResult:
    """Scan operators by symmetric weight for the cheapest KL violation.

    An operator violates the conditions when it commutes with every
    generator without lying in the stabilizer group.  Since the effective
    weight is at least ``min(1, c_z)`` times the symmetric weight, the scan
    stops once no heavier class can beat the best value found.  For
    ``k = 0`` nothing is undetectable; the cheapest non-identity stabilizer
    is reported instead.
    """
    n = t.n
    reducer = GroupReducer(t)
    floor_rate = min(1.0, c_z)
    best, witness = float("inf"), ""
    for w in range(1, (max_weight or n) + 1):
        if floor_rate * w >= best:
            break
        if comb(n, w) * 3**w > 1 << 26:
            raise BudgetError(f"weight-{w} class on {n} qubits exceeds the scan budget")
        x, z = _weight_block(n, w, (1, 2, 3))
        if t.k == 0:
            bad = reducer.contains(x, z)
        else:
            bad = (syndromes(x, z, t) == 0) & ~reducer.contains(x, z)
        if bad.any():
            eff = effective_weights(x[bad], z[bad], c_z)
            i = int(np.argmin(eff))
            if eff[i] < best:
                best = float(eff[i])
                witness = str(PauliString(n, int(x[bad][i]), int(z[bad][i])))
    d_e = int(floor(best + 1e-9)) if np.isfinite(best) else 0
    return DistanceResult(best, d_e, witness)


# ---------------------------------------------------------------------------
# Failure probability


@dataclass
class SyndromeTable:
    n: int
    syndromes: np.ndarray  # packed syndrome keys, ascending
    cx: np.ndarray  # chosen correction, packed x
    cz: np.ndarray
    mass: np.ndarray  # total enumerated probability per syndrome

    def correction(self, syndrome: int) -> PauliString:
        i = int(np.searchsorted(self.syndromes, syndrome))
        if i >= len(self.syndromes) or self.syndromes[i] != syndrome:
            raise KeyError(syndrome)
        return PauliString(self.n, int(self.cx[i]), int(self.cz[i]))


@dataclass(frozen=True)
class FailureResult:
    p_f: float
    residual: float  # unenumerated probability (0 in exact mode), included in p_f
    table: SyndromeTable


def build_syndrome_table(t: Tableau, m: NoiseModel, max_weight: int | None = None) -> tuple[SyndromeTable, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    n = t.n
    cap = n if max_weight is None else min(max_weight, n)
    x, z = enumerate_paulis(n, cap)
    p = probabilities(x, z, n, m)
    syn = syndromes(x, z, t)
    # highest probability first; probabilities within TIE_RTOL count as tied
    # and keep enumeration order
    order = np.lexsort((np.arange(len(p)), -tie_key(p), syn))
    s_sorted = syn[order]
    first = np.r_[True, s_sorted[1:] != s_sorted[:-1]]
    keys = s_sorted[first]
    pick = order[first]
    mass = np.add.reduceat(p[order], np.flatnonzero(first))
    table = SyndromeTable(n, keys, x[pick], z[pick], mass)
    return table, x, z, p, syn


def failure_probability(t: Tableau, m: NoiseModel, max_weight: int | None = None) -> FailureResult:
    """Most-likely-error decoding failure rate.

    With ``max_weight=None`` all ``4^n`` errors are enumerated.  Otherwise
    only errors up to that weight are, and the probability of the rest is
    added as a pessimistic residual.
    """
    n = t.n
    if max_weight is None and n > MAX_EXACT_QUBITS:
        raise BudgetError(f"exact failure rate needs 4^{n} errors; pass max_weight for a bounded estimate")
    table, x, z, p, syn = build_syndrome_table(t, m, max_weight)
    idx = np.searchsorted(table.syndromes, syn)
    ok = GroupReducer(t).contains(x ^ table.cx[idx], z ^ table.cz[idx])
    fail = float(p[~ok].sum())
    cap = n if max_weight is None else min(max_weight, n)
    q = 1.0 - m.p_i
    residual = sum(comb(n, w) * m.p_i ** (n - w) * q**w for w in range(cap + 1, n + 1))
    return FailureResult(min(1.0, fail + residual), residual, table)


# ---------------------------------------------------------------------------
# Sweeps


@dataclass(frozen=True)
class SweepRow:
    c_z: float
    p_i: float
    kl_sum: float
    d_e: int
    p_f: float


def evaluate_sweep(
    t: Tableau,
    grid: Iterable[tuple[float, float]],
    d: int = 3,
    softness: int | str = "exact",
    max_weight: int | None = None,
) -> list[SweepRow]:
    """Weighted KL sum (targets of weight < d), effective distance and
    failure rate at each ``(c_Z, p_I)`` point."""
    rows = []
    dist_cache: dict[float, int] = {}
    for c_z, p_i in grid:
        m = NoiseModel(p_i, c_z)
        es = enumerate_errors(t.n, d, "stabilizer", m)
        rep = kl_check(t, es, softness)
        if c_z not in dist_cache:
            dist_cache[c_z] = distance(t, c_z).d_e
        pf = failure_probability(t, m, max_weight).p_f
        rows.append(SweepRow(float(c_z), float(p_i), rep.kl_sum, dist_cache[c_z], pf))
    return rows


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["c_Z", "p_I", "kl_sum", "d_e", "p_f"])
    for r in rows:
        w.writerow([repr(r.c_z), repr(r.p_i), repr(r.kl_sum), r.d_e, repr(r.p_f)])
    return buf.getvalue()
