"""Phase-free binary-symplectic Pauli strings, tableaus and Clifford gates.

A Pauli string on ``n`` qubits is stored as two bit masks ``x`` and ``z``
where bit ``i`` belongs to qubit ``i`` (0-indexed, leftmost character of the
text form).  ``I=(0,0)``, ``X=(1,0)``, ``Y=(1,1)``, ``Z=(0,1)``.  Phases are
discarded everywhere, so multiplication is XOR.

Tableaus hold one ``uint64`` word per row for each of the x- and z-blocks,
which limits ``n`` to 64 qubits.  Serialization uses the row layout
``(x_0..x_{n-1}, z_0..z_{n-1})`` packed little-endian into bytes.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

MAX_QUBITS = 64

SINGLE_QUBIT_KINDS = ("H", "S", "SqrtX")
TWO_QUBIT_KINDS = ("CNOT", "CZ", "SqrtXX")
GATE_KINDS = SINGLE_QUBIT_KINDS + TWO_QUBIT_KINDS
# integer codes used by the vectorized kernels
KIND_CODE = {kind: i for i, kind in enumerate(GATE_KINDS)}
SYMMETRIC_KINDS = ("CZ", "SqrtXX")

_CHAR_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_CHAR = {v: k for k, v in _CHAR_BITS.items()}
_ONE = np.uint64(1)


class DimensionError(ValueError):
    """Operands disagree on qubit count or batch shape."""


class GateError(ValueError):
    """Gate kind or qubit indices are invalid for the register."""


# ---------------------------------------------------------------------------
# Pauli strings


@dataclass(frozen=True)
class PauliString:
    """A phase-free Pauli operator ``x``/``z`` bit masks on ``n`` qubits."""

    n: int
    x: int
    z: int

    @classmethod
    def from_str(cls, text: str) -> "PauliString":
        text = text.strip().upper()
        x = z = 0
        for i, ch in enumerate(text):
            try:
                bx, bz = _CHAR_BITS[ch]
            except KeyError:
                raise ValueError(f"invalid Pauli character {ch!r} in {text!r}") from None
            x |= bx << i
            z |= bz << i
        return cls(len(text), x, z)

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "PauliString":
        """Build from the binary vector ``(x_1..x_n, z_1..z_n)``."""
        if len(bits) % 2:
            raise DimensionError("binary Pauli vector must have even length")
        n = len(bits) // 2
        x = sum(int(b) << i for i, b in enumerate(bits[:n]))
        z = sum(int(b) << i for i, b in enumerate(bits[n:]))
        return cls(n, x, z)

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n, 0, 0)

    def bits(self) -> np.ndarray:
        return np.array(
            [(self.x >> i) & 1 for i in range(self.n)] + [(self.z >> i) & 1 for i in range(self.n)],
            dtype=np.uint8,
        )

    def __str__(self) -> str:
        return "".join(_BITS_CHAR[((self.x >> i) & 1, (self.z >> i) & 1)] for i in range(self.n))

    def __mul__(self, other: "PauliString") -> "PauliString":
        return pauli_mul(self, other)

    @property
    def weight(self) -> int:
        return (self.x | self.z).bit_count()

    def counts(self) -> tuple[int, int, int]:
        """Number of X, Y and Z factors."""
        return (
            (self.x & ~self.z).bit_count(),
            (self.x & self.z).bit_count(),
            (self.z & ~self.x).bit_count(),
        )

    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0


def _check_same_n(a: PauliString, b: PauliString) -> None:
    if a.n != b.n:
        raise DimensionError(f"Pauli strings act on {a.n} and {b.n} qubits")


def symplectic_product(a: PauliString, b: PauliString) -> int:
    """0 if ``a`` and ``b`` commute, 1 if they anticommute."""
    _check_same_n(a, b)
    return ((a.x & b.z) ^ (a.z & b.x)).bit_count() & 1


def pauli_mul(a: PauliString, b: PauliString) -> PauliString:
    _check_same_n(a, b)
    return PauliString(a.n, a.x ^ b.x, a.z ^ b.z)


def symplectic_metric(n: int) -> np.ndarray:
    """The 2n x 2n matrix with identity off-diagonal blocks."""
    eye = np.eye(n, dtype=np.uint8)
    zero = np.zeros((n, n), dtype=np.uint8)
    return np.block([[zero, eye], [eye, zero]])


# ---------------------------------------------------------------------------
# Gates


@dataclass(frozen=True)
class GateAction:
    kind: str
    qubits: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.kind not in GATE_KINDS:
            raise GateError(f"unknown gate kind {self.kind!r}")
        arity = 1 if self.kind in SINGLE_QUBIT_KINDS else 2
        if len(self.qubits) != arity:
            raise GateError(f"{self.kind} acts on {arity} qubit(s), got {self.qubits}")
        if arity == 2 and self.qubits[0] == self.qubits[1]:
            raise GateError(f"{self.kind} needs two distinct qubits, got {self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise GateError(f"negative qubit index in {self.qubits}")

    def check(self, n: int) -> None:
        if any(q >= n for q in self.qubits):
            raise GateError(f"{self} out of range for {n} qubits")

    def __str__(self) -> str:
        return f"{self.kind}({','.join(map(str, self.qubits))})"


def _conjugate_int(kind: str, qubits: tuple[int, ...], x: int, z: int) -> tuple[int, int]:
    """Column-update rule on a single row held as Python ints."""
    a = qubits[0]
    xa, za = (x >> a) & 1, (z >> a) & 1
    if kind == "H":
        d = xa ^ za
        return x ^ (d << a), z ^ (d << a)
    if kind == "S":
        return x, z ^ (xa << a)
    if kind == "SqrtX":
        return x ^ (za << a), z
    b = qubits[1]
    xb, zb = (x >> b) & 1, (z >> b) & 1
    if kind == "CNOT":
        return x ^ (xa << b), z ^ (zb << a)
    if kind == "CZ":
        return x, z ^ (xb << a) ^ (xa << b)
    if kind == "SqrtXX":
        s = za ^ zb
        return x ^ (s << a) ^ (s << b), z
    raise GateError(kind)


def conjugate_pauli(p: PauliString, gate: GateAction) -> PauliString:
    gate.check(p.n)
    x, z = _conjugate_int(gate.kind, gate.qubits, p.x, p.z)
    return PauliString(p.n, x, z)


def gate_matrix(gate: GateAction, n: int) -> np.ndarray:
    """The 2n x 2n binary matrix M with ``row' = row @ M (mod 2)``."""
    gate.check(n)
    m = np.zeros((2 * n, 2 * n), dtype=np.uint8)
    for col in range(2 * n):
        x, z = (1 << col, 0) if col < n else (0, 1 << (col - n))
        x, z = _conjugate_int(gate.kind, gate.qubits, x, z)
        m[col] = PauliString(n, x, z).bits()
    return m


# ---------------------------------------------------------------------------
# Tableaus


def _rref_ints(rows: Iterable[int]) -> list[int]:
    """Reduced row echelon form of GF(2) row vectors held as ints.

    Pivots are the highest set bit of each row; the result is sorted in
    decreasing pivot order and unique for a given row space.
    """
    basis: list[int] = []
    for v in rows:
        for b in basis:
            v = min(v, v ^ b)
        if v:
            basis = [min(b, b ^ v) for b in basis]
            basis.append(v)
    return sorted(basis, reverse=True)


def _reduce_int(v: int, basis: list[int]) -> int:
    for b in basis:
        v = min(v, v ^ b)
    return v


@dataclass(frozen=True, eq=False)
class Tableau:
    """``n - k`` stabilizer generators as packed x/z words."""

    n: int
    k: int
    x: np.ndarray
    z: np.ndarray

    def __post_init__(self) -> None:
        if not 0 < self.n <= MAX_QUBITS:
            raise DimensionError(f"n must lie in 1..{MAX_QUBITS}, got {self.n}")
        if not 0 <= self.k <= self.n:
            raise DimensionError(f"k must lie in 0..n, got {self.k}")
        if self.x.shape != (self.n - self.k,) or self.z.shape != (self.n - self.k,):
            raise DimensionError(
                f"expected {self.n - self.k} rows, got shapes {self.x.shape} / {self.z.shape}"
            )

    @classmethod
    def initial(cls, n: int, k: int) -> "Tableau":
        """Generators ``Z_k .. Z_{n-1}``: the logical qubits sit first."""
        z = np.array([1 << q for q in range(k, n)], dtype=np.uint64)
        return cls(n, k, np.zeros(n - k, dtype=np.uint64), z)

    @classmethod
    def from_paulis(cls, rows: Sequence[PauliString], k: int | None = None) -> "Tableau":
        if not rows:
            raise DimensionError("a tableau needs at least one row; use Tableau.empty")
        n = rows[0].n
        if any(r.n != n for r in rows):
            raise DimensionError("rows act on different qubit counts")
        k = n - len(rows) if k is None else k
        return cls(
            n,
            k,
            np.array([r.x for r in rows], dtype=np.uint64),
            np.array([r.z for r in rows], dtype=np.uint64),
        )

    @classmethod
    def from_strings(cls, rows: Sequence[str] | str) -> "Tableau":
        if isinstance(rows, str):
            rows = [line for line in rows.split() if line]
        return cls.from_paulis([PauliString.from_str(r) for r in rows])

    @classmethod
    def empty(cls, n: int) -> "Tableau":
        """No generators: the unencoded register (k = n)."""
        return cls(n, n, np.zeros(0, dtype=np.uint64), np.zeros(0, dtype=np.uint64))

    @classmethod
    def from_bits(cls, bits: np.ndarray, k: int | None = None) -> "Tableau":
        bits = np.asarray(bits, dtype=np.uint8)
        r, two_n = bits.shape
        n = two_n // 2
        weights = np.uint64(1) << np.arange(n, dtype=np.uint64)
        x = (bits[:, :n].astype(np.uint64) * weights).sum(axis=1, dtype=np.uint64)
        z = (bits[:, n:].astype(np.uint64) * weights).sum(axis=1, dtype=np.uint64)
        return cls(n, n - r if k is None else k, x, z)

    @property
    def num_rows(self) -> int:
        return self.n - self.k

    def rows(self) -> list[PauliString]:
        return [PauliString(self.n, int(x), int(z)) for x, z in zip(self.x, self.z)]

    def to_strings(self) -> list[str]:
        return [str(p) for p in self.rows()]

    def to_text(self) -> str:
        return "\n".join(self.to_strings()) + "\n"

    def bits(self) -> np.ndarray:
        """(n-k) x 2n 0/1 matrix, x-block then z-block."""
        return unpack_rows(self.x, self.z, self.n)

    def to_bytes(self) -> bytes:
        return np.packbits(self.bits(), axis=1, bitorder="little").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, n: int, k: int) -> "Tableau":
        row_bytes = (2 * n + 7) // 8
        packed = np.frombuffer(data, dtype=np.uint8).reshape(n - k, row_bytes)
        bits = np.unpackbits(packed, axis=1, bitorder="little", count=2 * n)
        return cls.from_bits(bits, k)

    def combined(self) -> list[int]:
        """Rows as ints ``x | z << n``."""
        return [int(x) | (int(z) << self.n) for x, z in zip(self.x, self.z)]

    def rref(self) -> list[int]:
        return _rref_ints(self.combined())

    def rank(self) -> int:
        return len(self.rref())

    def commutes(self) -> bool:
        rows = self.rows()
        return all(symplectic_product(a, b) == 0 for a, b in combinations(rows, 2))

    def is_valid(self) -> bool:
        return self.commutes() and self.rank() == self.num_rows

    def same_group(self, other: "Tableau") -> bool:
        """Equality of the generated groups (GF(2) row spaces)."""
        return self.n == other.n and self.rref() == other.rref()

    def apply(self, gate: GateAction) -> "Tableau":
        return apply_gate(self, gate)

    def apply_all(self, gates: Iterable[GateAction]) -> "Tableau":
        t = self
        for g in gates:
            t = apply_gate(t, g)
        return t

    def group_elements(self) -> tuple[np.ndarray, np.ndarray]:
        """All ``2^(n-k)`` elements of the generated group (Gray-code order)."""
        r = self.num_rows
        size = 1 << r
        gray = np.arange(size, dtype=np.int64)
        gray ^= gray >> 1
        xs = np.zeros(size, dtype=np.uint64)
        zs = np.zeros(size, dtype=np.uint64)
        for i in range(r):
            sel = ((gray >> i) & 1).astype(bool)
            xs[sel] ^= self.x[i]
            zs[sel] ^= self.z[i]
        return xs, zs

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Tableau):
            return NotImplemented
        return (
            self.n == other.n
            and self.k == other.k
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.z, other.z)
        )

    def __hash__(self) -> int:
        return hash((self.n, self.k, self.x.tobytes(), self.z.tobytes()))

    def __repr__(self) -> str:
        return f"Tableau(n={self.n}, k={self.k}, rows={self.to_strings()})"


def unpack_rows(x: np.ndarray, z: np.ndarray, n: int) -> np.ndarray:
    """Expand packed words (any leading shape) into ``(..., 2n)`` bits."""
    shifts = np.arange(n, dtype=np.uint64)
    xb = (x[..., None] >> shifts) & _ONE
    zb = (z[..., None] >> shifts) & _ONE
    return np.concatenate([xb, zb], axis=-1).astype(np.uint8)


def apply_gate(t: Tableau, gate: GateAction) -> Tableau:
    """Conjugate every generator by ``gate`` (sparse column update)."""
    gate.check(t.n)
    xs = np.empty_like(t.x)
    zs = np.empty_like(t.z)
    for i, (x, z) in enumerate(zip(t.x, t.z)):
        xs[i], zs[i] = _conjugate_int(gate.kind, gate.qubits, int(x), int(z))
    return Tableau(t.n, t.k, xs, zs)


# ---------------------------------------------------------------------------
# Batched kernel


def encode_gates(gates: Sequence[GateAction]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gate list -> (kind code, first qubit, second qubit) arrays."""
    kinds = np.array([KIND_CODE[g.kind] for g in gates], dtype=np.int64)
    a = np.array([g.qubits[0] for g in gates], dtype=np.uint64)
    b = np.array([g.qubits[-1] for g in gates], dtype=np.uint64)
    return kinds, a, b


def apply_codes(
    x: np.ndarray, z: np.ndarray, kinds: np.ndarray, a: np.ndarray, b: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Apply one gate per batch element to ``(B, rows)`` packed tableaus.

    ``kinds``, ``a`` and ``b`` have shape ``(B,)``; single-qubit gates ignore
    ``b``.  Returns new arrays; the inputs are not modified.
    """
    a = a.astype(np.uint64)[:, None]
    b = b.astype(np.uint64)[:, None]
    kinds = np.asarray(kinds)[:, None]

    def mask(kind: str) -> np.ndarray:
        return (kinds == KIND_CODE[kind]).astype(np.uint64)

    h, s, sx = mask("H"), mask("S"), mask("SqrtX")
    cx, cz, sxx = mask("CNOT"), mask("CZ"), mask("SqrtXX")

    xa, za = (x >> a) & _ONE, (z >> a) & _ONE
    xb, zb = (x >> b) & _ONE, (z >> b) & _ONE
    hd = xa ^ za
    szz = za ^ zb

    dxa = (h * hd) | (sx * za) | (sxx * szz)
    dza = (h * hd) | (s * xa) | (cx * zb) | (cz * xb)
    dxb = (cx * xa) | (sxx * szz)
    dzb = cz * xa
    return x ^ (dxa << a) ^ (dxb << b), z ^ (dza << a) ^ (dzb << b)


def stack_tableaus(ts: Sequence[Tableau]) -> tuple[np.ndarray, np.ndarray]:
    if not ts:
        raise DimensionError("empty batch")
    n, k = ts[0].n, ts[0].k
    if any(t.n != n or t.k != k for t in ts):
        raise DimensionError("heterogeneous (n, k) in batch")
    return np.stack([t.x for t in ts]), np.stack([t.z for t in ts])


def apply_gate_batched(ts: Sequence[Tableau], gates: Sequence[GateAction]) -> list[Tableau]:
    """Elementwise :func:`apply_gate` over a homogeneous batch."""
    if len(ts) != len(gates):
        raise DimensionError(f"{len(ts)} tableaus but {len(gates)} gates")
    x, z = stack_tableaus(ts)
    n, k = ts[0].n, ts[0].k
    for g in gates:
        g.check(n)
    x, z = apply_codes(x, z, *encode_gates(gates))
    return [Tableau(n, k, x[i].copy(), z[i].copy()) for i in range(len(ts))]


# ---------------------------------------------------------------------------
# Group membership


def subgroup_elements(t: Tableau, softness: int) -> set[tuple[int, int]]:
    """Products of at most ``softness`` distinct generators (identity excluded)."""
    rows = list(zip((int(v) for v in t.x), (int(v) for v in t.z)))
    out: set[tuple[int, int]] = set()
    for size in range(1, min(softness, len(rows)) + 1):
        for combo in combinations(rows, size):
            x = z = 0
            for rx, rz in combo:
                x ^= rx
                z ^= rz
            out.add((x, z))
    return out


def membership_in_group(p: PauliString, t: Tableau, softness: int | str = "exact") -> bool:
    """Whether ``p`` lies in the (softness-limited) group generated by ``t``.

    ``softness="exact"`` solves ``p = c . G`` over GF(2).  An integer
    softness ``s`` only accepts products of at most ``s`` generators, so
    ``s = 0`` accepts nothing.
    """
    if p.n != t.n:
        raise DimensionError(f"Pauli on {p.n} qubits vs tableau on {t.n}")
    if softness == "exact":
        v = p.x | (p.z << t.n)
        return _reduce_int(v, t.rref()) == 0
    if isinstance(softness, str) or softness < 0:
        raise ValueError(f"softness must be a non-negative int or 'exact', got {softness!r}")
    return (p.x, p.z) in subgroup_elements(t, softness)


class GroupReducer:
    """Vectorized coset reduction modulo a tableau's row space.

    ``reduce(x, z)`` maps every Pauli to a canonical representative of its
    coset ``P * S``; it is zero exactly for members of ``S``.
    """

    def __init__(self, t: Tableau):
        self.n = t.n
        self.basis = t.rref()
        n = t.n
        self._rows = []
        for v in self.basis:
            pivot = v.bit_length() - 1
            self._rows.append(
                (
                    pivot,
                    np.uint64(v & ((1 << n) - 1)),
                    np.uint64(v >> n),
                )
            )

    def reduce(self, x: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = np.array(x, dtype=np.uint64, copy=True)
        z = np.array(z, dtype=np.uint64, copy=True)
        n = self.n
        for pivot, rx, rz in self._rows:
            if pivot < n:
                hit = ((x >> np.uint64(pivot)) & _ONE).astype(bool)
            else:
                hit = ((z >> np.uint64(pivot - n)) & _ONE).astype(bool)
            x[hit] ^= rx
            z[hit] ^= rz
        return x, z

    def contains(self, x: np.ndarray, z: np.ndarray) -> np.ndarray:
        rx, rz = self.reduce(x, z)
        return (rx == 0) & (rz == 0)
