"""Code-discovery environment: gate sets, circuits, episodes and pruning."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import ceil, sqrt
from typing import Any, Sequence

import numpy as np

from .kl import KLKernel, normalize_softness
from .noise import ErrorSet, NoiseModel, enumerate_errors
from .symplectic import (
    GATE_KINDS,
    SINGLE_QUBIT_KINDS,
    SYMMETRIC_KINDS,
    GateAction,
    GateError,
    Tableau,
    apply_codes,
    encode_gates,
    unpack_rows,
)

CONNECTIVITIES = (
    "all_to_all_directed",
    "all_to_all",
    "line",
    "brick",
    "square",
    "nn_square_lattice",
    "nnn_ring",
    "custom",
)
MODES = ("fixed_target", "meta", "css")
# "normalized": p / max(p) at the episode's c_Z; "probability": raw p
REWARD_WEIGHTS = ("normalized", "probability")
DEFAULT_CZ_GRID = tuple(round(0.5 + 0.1 * i, 1) for i in range(16))

# 7-qubit layouts read off the published encoding circuits
BRICK_7 = ((0, 1), (1, 2), (0, 3), (3, 4), (2, 5), (4, 5), (5, 6))
SQUARE_7 = ((0, 1), (1, 2), (0, 3), (1, 4), (2, 5), (3, 4), (4, 5), (5, 6))


class EnvError(ValueError):
    """Invalid environment configuration or action."""


def connectivity_edges(n: int, connectivity: str, edges: Sequence[Sequence[int]] | None = None) -> list[tuple[int, int]]:
    """Undirected qubit pairs ``(i, j)`` with ``i < j`` for a named layout."""
    if edges is not None:
        out = sorted({(min(a, b), max(a, b)) for a, b in edges})
    elif connectivity in ("all_to_all", "all_to_all_directed"):
        out = [(i, j) for i in range(n) for j in range(i + 1, n)]
    elif connectivity == "line":
        out = [(i, i + 1) for i in range(n - 1)]
    elif connectivity in ("brick", "square"):
        if n != 7:
            raise EnvError(f"{connectivity} layout is only built in for n=7; pass explicit edges")
        out = sorted(BRICK_7 if connectivity == "brick" else SQUARE_7)
    elif connectivity == "nn_square_lattice":
        cols = ceil(sqrt(n))
        out = []
        for q in range(n):
            if (q + 1) % cols and q + 1 < n:
                out.append((q, q + 1))
            if q + cols < n:
                out.append((q, q + cols))
        out.sort()
    elif connectivity == "nnn_ring":
        pairs = {(min(i, (i + s) % n), max(i, (i + s) % n)) for i in range(n) for s in (1, 2)}
        out = sorted(p for p in pairs if p[0] != p[1])
    elif connectivity == "custom":
        raise EnvError("custom connectivity needs an explicit edge list")
    else:
        raise EnvError(f"unknown connectivity {connectivity!r}; choose from {CONNECTIVITIES}")
    if any(not (0 <= a < n and 0 <= b < n) or a == b for a, b in out):
        raise EnvError(f"edge list {out} is invalid for {n} qubits")
    return out


@dataclass(frozen=True)
class GateSetSpec:
    n: int
    kinds: tuple[str, ...] = ("H", "CNOT")
    connectivity: str = "all_to_all_directed"
    edges: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self) -> None:
        bad = [k for k in self.kinds if k not in GATE_KINDS]
        if bad:
            raise EnvError(f"unknown gate kinds {bad}; choose from {GATE_KINDS}")
        if self.connectivity not in CONNECTIVITIES:
            raise EnvError(f"unknown connectivity {self.connectivity!r}; choose from {CONNECTIVITIES}")

    def actions(self) -> list[GateAction]:
        return action_space(self)


def action_space(spec: GateSetSpec) -> list[GateAction]:
    """Single-qubit gates by (kind, qubit), then two-qubit gates by (kind, control, target)."""
    kinds = [k for k in GATE_KINDS if k in spec.kinds]
    acts = [GateAction(k, (q,)) for k in kinds if k in SINGLE_QUBIT_KINDS for q in range(spec.n)]
    two = [k for k in kinds if k not in SINGLE_QUBIT_KINDS]
    if two:
        pairs = connectivity_edges(spec.n, spec.connectivity, spec.edges)
        directed = spec.connectivity != "all_to_all_directed"
        for k in two:
            ordered = set(pairs)
            if directed and k not in SYMMETRIC_KINDS:
                ordered |= {(b, a) for a, b in pairs}
            acts.extend(GateAction(k, p) for p in sorted(ordered))
    if not acts:
        raise EnvError("empty action space")
    return acts


# ---------------------------------------------------------------------------
# Circuits


@dataclass
class Circuit:
    n: int
    k: int
    gates: list[GateAction] = field(default_factory=list)
    gateset: tuple[str, ...] = ("H", "CNOT")
    connectivity: str = "all_to_all_directed"
    meta: dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.gates)

    def tableau(self) -> Tableau:
        return Tableau.initial(self.n, self.k).apply_all(self.gates)

    def to_dict(self) -> dict[str, Any]:
        d = {
            "n": self.n,
            "k": self.k,
            "gates": [{"kind": g.kind, "qubits": list(g.qubits)} for g in self.gates],
            "gateset": list(self.gateset),
            "connectivity": self.connectivity,
        }
        if self.meta:
            d["meta"] = self.meta
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Circuit":
        return cls(
            int(d["n"]),
            int(d["k"]),
            [GateAction(g["kind"], tuple(int(q) for q in g["qubits"])) for g in d["gates"]],
            tuple(d.get("gateset", ("H", "CNOT"))),
            d.get("connectivity", "all_to_all_directed"),
            dict(d.get("meta", {})),
        )

    @classmethod
    def from_json(cls, text: str) -> "Circuit":
        return cls.from_dict(json.loads(text))

    def __str__(self) -> str:
        return " ".join(str(g) for g in self.gates)


def _self_inverse_pair(a: GateAction, b: GateAction) -> bool:
    # every supported gate is an involution once phases are dropped
    return a == b


def prune(circuit: Circuit, target: Tableau | None = None) -> Circuit:
    """Shorten a circuit while keeping its final stabilizer group.

    Alternates greedy single-gate deletion (scanning from the end) with
    cancellation of adjacent identical gates until neither changes anything.
    """
    target = circuit.tableau() if target is None else target
    init = Tableau.initial(circuit.n, circuit.k)
    gates = list(circuit.gates)

    def ok(gs: list[GateAction]) -> bool:
        return init.apply_all(gs).same_group(target)

    if not ok(gates):
        raise EnvError("circuit does not produce the target tableau")
    changed = True
    while changed:
        changed = False
        i = len(gates) - 1
        while i >= 0:
            trial = gates[:i] + gates[i + 1 :]
            if ok(trial):
                gates = trial
                changed = True
            i -= 1
        i = 0
        while i < len(gates) - 1:
            if _self_inverse_pair(gates[i], gates[i + 1]):
                trial = gates[:i] + gates[i + 2 :]
                if ok(trial):
                    gates = trial
                    changed = True
                    i = max(i - 1, 0)
                    continue
            i += 1
    return Circuit(circuit.n, circuit.k, gates, circuit.gateset, circuit.connectivity, dict(circuit.meta))


# ---------------------------------------------------------------------------
# Environments


@dataclass(frozen=True)
class EnvConfig:
    n: int
    k: int
    d: int
    mode: str = "fixed_target"
    p_i: float = 0.9
    c_z: float = 1.0
    c_z_grid: tuple[float, ...] = DEFAULT_CZ_GRID
    gateset: tuple[str, ...] = ("H", "CNOT")
    connectivity: str = "all_to_all_directed"
    edges: tuple[tuple[int, int], ...] | None = None
    max_gates: int = 20
    softness: int | str = 2
    hadamard_qubits: tuple[int, ...] = ()
    error_ops: tuple[str, ...] | None = None
    reward_weights: str = "normalized"

    def __post_init__(self) -> None:
        if self.reward_weights not in REWARD_WEIGHTS:
            raise EnvError(f"unknown reward_weights {self.reward_weights!r}; choose from {REWARD_WEIGHTS}")
        if self.error_ops is not None and any(len(op) != self.n for op in self.error_ops):
            raise EnvError(f"every error operator must have length n={self.n}")
        if self.mode not in MODES:
            raise EnvError(f"unknown mode {self.mode!r}; choose from {MODES}")
        if not 0 <= self.k < self.n:
            raise EnvError(f"need 0 <= k < n, got n={self.n}, k={self.k}")
        if self.d < 1:
            raise EnvError("d must be >= 1")
        if self.max_gates < 1:
            raise EnvError("max_gates must be >= 1")
        normalize_softness(self.softness)
        if self.mode == "css":
            bad = [q for q in self.hadamard_qubits if not self.k <= q < self.n]
            if bad:
                raise EnvError(f"Hadamard block qubits {bad} must lie in k..n-1 (logical slots are 0..k-1)")
        elif self.hadamard_qubits:
            raise EnvError("hadamard_qubits only apply to css mode")
        if self.mode == "meta" and not self.c_z_grid:
            raise EnvError("meta mode needs a non-empty c_Z grid")

    @property
    def gate_spec(self) -> GateSetSpec:
        kinds = ("CNOT",) if self.mode == "css" else tuple(self.gateset)
        return GateSetSpec(self.n, kinds, self.connectivity, self.edges)

    @property
    def obs_dim(self) -> int:
        return 2 * self.n * (self.n - self.k) + (self.mode == "meta")

    def h_block(self) -> list[GateAction]:
        return [GateAction("H", (q,)) for q in sorted(self.hadamard_qubits)]

    def initial_tableau(self) -> Tableau:
        return Tableau.initial(self.n, self.k).apply_all(self.h_block())

    def error_set(self, c_z: float | None = None) -> ErrorSet:
        if self.error_ops is not None:
            return ErrorSet.from_strings(self.error_ops, NoiseModel(self.p_i, self.c_z if c_z is None else c_z))
        mode = "css" if self.mode == "css" else "stabilizer"
        return enumerate_errors(self.n, self.d, mode, NoiseModel(self.p_i, self.c_z if c_z is None else c_z))


@dataclass
class FinishedEpisode:
    env: int
    actions: list[int]
    ret: float
    kl_sum: float
    success: bool
    c_z: float


class CodeEnv:
    """A batch of discovery environments advancing in lockstep.

    Tableaus are packed ``(B, n-k)`` words.  Rewards are the negative
    weighted KL sums after each gate.  With ``auto_reset`` a finished
    environment is reset immediately and its episode is reported in the
    ``info`` list returned by :meth:`step`.
    """

    def __init__(self, cfg: EnvConfig, num_envs: int = 1, seed: int = 0, auto_reset: bool = True):
        self.cfg = cfg
        self.num_envs = num_envs
        self.auto_reset = auto_reset
        self.actions = action_space(cfg.gate_spec)
        self.codes = encode_gates(self.actions)
        self.errors = cfg.error_set()
        self.kernel = KLKernel(self.errors, cfg.softness)
        self.grid = np.array(cfg.c_z_grid if cfg.mode == "meta" else (cfg.c_z,), dtype=np.float64)
        self._lambda_table = np.stack([self._weights(float(c)) for c in self.grid])
        init = cfg.initial_tableau()
        self._x0, self._z0 = init.x, init.z
        self.rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(num_envs)]
        r = cfg.n - cfg.k
        self.x = np.zeros((num_envs, r), dtype=np.uint64)
        self.z = np.zeros((num_envs, r), dtype=np.uint64)
        self.c_z = np.full(num_envs, cfg.c_z, dtype=np.float64)
        self.lam = np.zeros((num_envs, len(self.errors)))
        self.steps = np.zeros(num_envs, dtype=np.int64)
        self.returns = np.zeros(num_envs)
        self.history = np.zeros((num_envs, cfg.max_gates), dtype=np.int64)
        self.last_kl = np.zeros(num_envs)
        self.done = np.zeros(num_envs, dtype=bool)

    @property
    def num_actions(self) -> int:
        return len(self.actions)

    @property
    def obs_dim(self) -> int:
        return self.cfg.obs_dim

    def _weights(self, c_z: float) -> np.ndarray:
        if self.cfg.reward_weights == "probability":
            return self.errors.with_noise(NoiseModel(self.cfg.p_i, c_z)).probabilities
        return self.errors.lambdas_for(c_z)

    def _reset_env(self, b: int, c_z: float | None = None) -> None:
        self.x[b] = self._x0
        self.z[b] = self._z0
        self.steps[b] = 0
        self.returns[b] = 0.0
        self.done[b] = False
        if c_z is not None:
            self.c_z[b] = c_z
            self.lam[b] = self._weights(float(c_z))
        else:
            idx = int(self.rngs[b].integers(len(self.grid))) if self.cfg.mode == "meta" else 0
            self.c_z[b] = self.grid[idx]
            self.lam[b] = self._lambda_table[idx]

    def reset(self, c_z: Sequence[float] | float | None = None) -> np.ndarray:
        """Reset every environment; meta mode draws c_Z from the grid unless given."""
        if c_z is not None and np.ndim(c_z) == 0:
            c_z = [float(c_z)] * self.num_envs
        for b in range(self.num_envs):
            self._reset_env(b, None if c_z is None else c_z[b])
        self.last_kl = self._kl(self.kernel.detected(self.x, self.z))
        return self.observe()

    def observe(self) -> np.ndarray:
        bits = unpack_rows(self.x, self.z, self.cfg.n).reshape(self.num_envs, -1).astype(np.float32)
        if self.cfg.mode == "meta":
            bits = np.concatenate([bits, self.c_z[:, None].astype(np.float32)], axis=1)
        return bits

    def _kl(self, det: np.ndarray) -> np.ndarray:
        return ((~det) * self.lam).sum(axis=1)

    def tableau(self, b: int = 0) -> Tableau:
        return Tableau(self.cfg.n, self.cfg.k, self.x[b].copy(), self.z[b].copy())

    def circuit(self, b: int = 0, actions: Sequence[int] | None = None) -> Circuit:
        acts = self.history[b, : self.steps[b]] if actions is None else actions
        gates = self.cfg.h_block() + [self.actions[int(a)] for a in acts]
        return Circuit(self.cfg.n, self.cfg.k, gates, self.cfg.gate_spec.kinds, self.cfg.connectivity)

    def step(self, actions: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[FinishedEpisode]]:
        actions = np.asarray(actions, dtype=np.int64)
        if actions.shape != (self.num_envs,):
            raise EnvError(f"expected {self.num_envs} actions, got shape {actions.shape}")
        if actions.min() < 0 or actions.max() >= self.num_actions:
            raise EnvError(f"action index out of range 0..{self.num_actions - 1}")
        if not self.auto_reset and self.done.any():
            raise EnvError("step() on a finished episode; call reset()")
        kinds, a, b = self.codes
        self.x, self.z = apply_codes(self.x, self.z, kinds[actions], a[actions], b[actions])
        rows = np.arange(self.num_envs)
        self.history[rows, self.steps] = actions
        self.steps += 1
        det = self.kernel.detected(self.x, self.z)
        kl = self._kl(det)
        self.last_kl = kl
        rewards = -kl
        self.returns += rewards
        full = self.steps >= self.cfg.max_gates
        solved = det.all(axis=1)
        dones = full if self.cfg.mode == "meta" else (full | solved)
        finished: list[FinishedEpisode] = []
        for e in np.flatnonzero(dones):
            finished.append(
                FinishedEpisode(
                    int(e),
                    self.history[e, : self.steps[e]].tolist(),
                    float(self.returns[e]),
                    float(kl[e]),
                    bool(solved[e]),
                    float(self.c_z[e]),
                )
            )
        self.done = dones.copy()
        if self.auto_reset and dones.any():
            for e in np.flatnonzero(dones):
                self._reset_env(int(e))
            self.last_kl = np.where(dones, self._kl(self.kernel.detected(self.x, self.z)), kl)
        return self.observe(), rewards, dones, finished


class Episode:
    """Single-environment view with explicit reset and no auto-reset."""

    def __init__(self, cfg: EnvConfig, seed: int = 0):
        self.env = CodeEnv(cfg, 1, seed, auto_reset=False)
        self.obs = self.env.reset()

    @property
    def cfg(self) -> EnvConfig:
        return self.env.cfg

    @property
    def tableau(self) -> Tableau:
        return self.env.tableau(0)

    @property
    def circuit(self) -> Circuit:
        return self.env.circuit(0)

    @property
    def step_count(self) -> int:
        return int(self.env.steps[0])

    @property
    def c_z(self) -> float:
        return float(self.env.c_z[0])

    @property
    def kl_sum(self) -> float:
        return float(self.env.last_kl[0])

    def reset(self, c_z: float | None = None) -> np.ndarray:
        self.obs = self.env.reset(c_z)
        return self.obs

    def action_index(self, gate: GateAction) -> int:
        try:
            return self.env.actions.index(gate)
        except ValueError:
            if self.cfg.mode == "css" and gate.kind != "CNOT":
                raise EnvError(f"css mode only accepts CNOT actions, got {gate}") from None
            raise EnvError(f"{gate} is not in the action space") from None

    def step(self, action: int | GateAction) -> tuple[np.ndarray, float, bool]:
        if isinstance(action, GateAction):
            action = self.action_index(action)
        obs, rew, done, _ = self.env.step(np.array([action]))
        self.obs = obs
        return obs[0], float(rew[0]), bool(done[0])


def css_env(cfg: EnvConfig, hadamard_qubits: Sequence[int], seed: int = 0) -> Episode:
    """Episode restricted to CNOT actions after a fixed Hadamard block."""
    fields = {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}
    fields.update(mode="css", hadamard_qubits=tuple(hadamard_qubits))
    try:
        return Episode(EnvConfig(**fields), seed)
    except GateError as exc:
        raise EnvError(str(exc)) from exc
