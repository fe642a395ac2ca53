"""Naive reference implementations working on Pauli text strings.

The reference functions never touch the packed-word kernels; they exist so
the fast paths have something slow and obvious to be compared against.  The
``check_*`` helpers at the bottom run those comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, product
from math import log
from typing import Sequence

import numpy as np

from .symplectic import GATE_KINDS, SINGLE_QUBIT_KINDS, GateAction, Tableau

_MUL = {
    ("I", "I"): "I", ("I", "X"): "X", ("I", "Y"): "Y", ("I", "Z"): "Z",
    ("X", "I"): "X", ("X", "X"): "I", ("X", "Y"): "Z", ("X", "Z"): "Y",
    ("Y", "I"): "Y", ("Y", "X"): "Z", ("Y", "Y"): "I", ("Y", "Z"): "X",
    ("Z", "I"): "Z", ("Z", "X"): "Y", ("Z", "Y"): "X", ("Z", "Z"): "I",
}


def mul(a: str, b: str) -> str:
    return "".join(_MUL[p, q] for p, q in zip(a, b))


def commute(a: str, b: str) -> bool:
    clashes = sum(1 for p, q in zip(a, b) if p != "I" and q != "I" and p != q)
    return clashes % 2 == 0


def weight(a: str) -> int:
    return sum(c != "I" for c in a)


def all_paulis(n: int) -> list[str]:
    """Every string, ordered by weight and then I < X < Y < Z text order."""
    return sorted(("".join(t) for t in product("IXYZ", repeat=n)), key=weight)


def group(gens: Sequence[str], n: int) -> set[str]:
    out = {"I" * n}
    for g in gens:
        out |= {mul(g, h) for h in out}
    return out


def products_up_to(gens: Sequence[str], s: int) -> set[str]:
    out = set()
    for size in range(1, min(s, len(gens)) + 1):
        for combo in combinations(gens, size):
            p = combo[0]
            for q in combo[1:]:
                p = mul(p, q)
            out.add(p)
    return out


def detected(gens: Sequence[str], errors: Sequence[str], softness: int | str = "exact") -> list[bool]:
    n = len(errors[0])
    members = group(gens, n) if softness == "exact" else products_up_to(gens, int(softness))
    out = []
    for e in errors:
        out.append(
            e == "I" * n or any(not commute(e, g) for g in gens) or e in members
        )
    return out


def solve_px(p_i: float, c_z: float) -> float:
    """Newton iteration for ``2x + x**c_z = 1 - p_i``.

    For ``c_z < 1`` the unknown becomes ``y = x**c_z`` so that the function
    is convex in either case; starting right of the root then converges
    monotonically.
    """
    t = 1.0 - p_i
    a = 1.0 / c_z if c_z < 1 else c_z  # convex exponent
    # solve 2u + u**a = t (c_z >= 1, u = x) or 2 u**a + u = t (c_z < 1, u = y)
    u = t
    for _ in range(500):
        if c_z >= 1:
            f, fp = 2 * u + u**a - t, 2 + a * u ** (a - 1)
        else:
            f, fp = 2 * u**a + u - t, 2 * a * u ** (a - 1) + 1
        step = f / fp
        u -= step
        if abs(step) <= 1e-17 * u:
            break
    return u if c_z >= 1 else u**a


def probability(e: str, p_i: float, c_z: float = 1.0) -> float:
    px = solve_px(p_i, c_z)
    table = {"I": p_i, "X": px, "Y": px, "Z": px**c_z}
    out = 1.0
    for c in e:
        out *= table[c]
    return out


def kl_sum(gens: Sequence[str], errors: Sequence[str], p_i: float, c_z: float = 1.0, softness: int | str = "exact") -> float:
    det = detected(gens, errors, softness)
    return sum(probability(e, p_i, c_z) for e, ok in zip(errors, det) if not ok)


def enumerators(gens: Sequence[str], n: int) -> tuple[list[int], list[int]]:
    """(A, B) by direct enumeration over the group and all 4^n strings."""
    a = [0] * (n + 1)
    for s in group(gens, n):
        a[weight(s)] += 1
    b = [0] * (n + 1)
    for e in all_paulis(n):
        if all(commute(e, g) for g in gens):
            b[weight(e)] += 1
    return a, b


def min_undetectable(gens: Sequence[str], n: int, c_z: float = 1.0) -> float:
    grp = group(gens, n)
    best = float("inf")
    for e in all_paulis(n):
        if e in grp or not all(commute(e, g) for g in gens):
            continue
        w = sum(1 for c in e if c in "XY") + c_z * e.count("Z")
        best = min(best, w)
    return best


def failure_probability(gens: Sequence[str], n: int, p_i: float, c_z: float = 1.0) -> float:
    grp = group(gens, n)
    table: dict[tuple[bool, ...], tuple[int, str]] = {}
    errors = all_paulis(n)
    for e in errors:
        syn = tuple(not commute(e, g) for g in gens)
        key = round(log(probability(e, p_i, c_z)) / 1e-9)
        if syn not in table or key > table[syn][0]:
            table[syn] = (key, e)
    fail = 0.0
    for e in errors:
        syn = tuple(not commute(e, g) for g in gens)
        if mul(table[syn][1], e) not in grp:
            fail += probability(e, p_i, c_z)
    return fail


def random_tableau(n: int, k: int, rng: np.random.Generator, depth: int | None = None,
                   kinds: Sequence[str] = ("H", "S", "CNOT")) -> Tableau:
    """Initial tableau scrambled by a random gate sequence."""
    kinds = [k_ for k_ in GATE_KINDS if k_ in kinds]
    t = Tableau.initial(n, k)
    gates = []
    for _ in range(depth if depth is not None else 4 * n):
        kind = kinds[int(rng.integers(len(kinds)))]
        if kind in SINGLE_QUBIT_KINDS or n == 1:
            if kind not in SINGLE_QUBIT_KINDS:
                continue
            gates.append(GateAction(kind, (int(rng.integers(n)),)))
        else:
            a, b = rng.choice(n, 2, replace=False)
            gates.append(GateAction(kind, (int(a), int(b))))
    return t.apply_all(gates)


@dataclass
class OracleReport:
    name: str
    cases: int
    mismatches: int
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.mismatches == 0


def check_kl(n: int, k: int, cases: int, rng: np.random.Generator, d: int = 3,
             softness: int | str = "exact") -> OracleReport:
    from .kl import kl_check
    from .noise import NoiseModel, enumerate_errors

    es = enumerate_errors(n, min(d, n + 1), "stabilizer", NoiseModel(0.9, 1.0))
    strings = es.strings()
    bad = 0
    for _ in range(cases):
        t = random_tableau(n, k, rng)
        ref = detected(t.to_strings(), strings, softness)
        if list(kl_check(t, es, softness).detected) != ref:
            bad += 1
    return OracleReport(f"kl n={n} k={k} softness={softness}", cases, bad)


def check_qwe(n: int, k: int, cases: int, rng: np.random.Generator) -> OracleReport:
    from .analysis import weight_enumerators

    bad = 0
    for _ in range(cases):
        t = random_tableau(n, k, rng)
        fp = weight_enumerators(t)
        if (list(fp.A), list(fp.B)) != enumerators(t.to_strings(), n):
            bad += 1
    return OracleReport(f"qwe n={n} k={k}", cases, bad)


def check_failure(n: int, k: int, cases: int, rng: np.random.Generator, p_i: float = 0.9,
                  c_z: float = 1.0, tol: float = 1e-12) -> OracleReport:
    from .analysis import failure_probability as fast
    from .noise import NoiseModel

    bad, worst = 0, 0.0
    for _ in range(cases):
        t = random_tableau(n, k, rng)
        gens = t.to_strings() if t.num_rows else []
        diff = abs(fast(t, NoiseModel(p_i, c_z)).p_f - failure_probability(gens, n, p_i, c_z))
        worst = max(worst, diff)
        bad += diff > tol
    return OracleReport(f"p_f n={n} k={k} p_I={p_i} c_Z={c_z}", cases, bad, f"max |diff| {worst:.2e}")


def check_distance(n: int, k: int, cases: int, rng: np.random.Generator, c_z: float = 1.0) -> OracleReport:
    from .analysis import distance

    bad = 0
    for _ in range(cases):
        t = random_tableau(n, k, rng)
        if abs(distance(t, c_z).raw - min_undetectable(t.to_strings(), n, c_z)) > 1e-9:
            bad += 1
    return OracleReport(f"distance n={n} k={k} c_Z={c_z}", cases, bad)
