"""Run configuration: validation, file loading and hashing."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import yaml

from .env import CONNECTIVITIES, DEFAULT_CZ_GRID, MODES, REWARD_WEIGHTS, EnvConfig, EnvError
from .kl import normalize_softness
from .ppo import HyperParams
from .symplectic import GATE_KINDS, MAX_QUBITS


class ConfigError(ValueError):
    """One or more invalid configuration fields."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


@dataclass(frozen=True)
class RunConfig:
    n: int
    k: int
    d: int
    seeds: tuple[int, ...]
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
    hyperparams: HyperParams = field(default_factory=HyperParams)
    stop_after: int | None = None  # successes per seed before stopping early
    prune: bool = True
    output_dir: str = "runs/out"

    def env_config(self) -> EnvConfig:
        return EnvConfig(
            n=self.n,
            k=self.k,
            d=self.d,
            mode=self.mode,
            p_i=self.p_i,
            c_z=self.c_z,
            c_z_grid=self.c_z_grid,
            gateset=self.gateset,
            connectivity=self.connectivity,
            edges=self.edges,
            max_gates=self.max_gates,
            softness=self.softness,
            hadamard_qubits=self.hadamard_qubits,
            error_ops=self.error_ops,
            reward_weights=self.reward_weights,
        )

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["hyperparams"] = asdict(self.hyperparams)
        return d

    def hash(self) -> str:
        """sha256 over everything that influences results (not output_dir)."""
        d = self.to_dict()
        d.pop("output_dir")
        text = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _tuple(v: Any) -> Any:
    if isinstance(v, list):
        return tuple(_tuple(x) for x in v)
    return v


def validate(cfg: RunConfig) -> RunConfig:
    problems = []
    if not 1 <= cfg.n <= MAX_QUBITS:
        problems.append(f"n: must lie in 1..{MAX_QUBITS}, got {cfg.n}")
    if not 0 <= cfg.k < cfg.n:
        problems.append(f"k: need 0 <= k < n, got {cfg.k}")
    if cfg.d < 1:
        problems.append(f"d: must be >= 1, got {cfg.d}")
    if cfg.mode not in MODES:
        problems.append(f"mode: {cfg.mode!r} is not one of {MODES}")
    if not 0 < cfg.p_i < 1:
        problems.append(f"p_i: must lie in (0, 1), got {cfg.p_i}")
    if cfg.c_z <= 0 or any(c <= 0 for c in cfg.c_z_grid):
        problems.append("c_z / c_z_grid: bias values must be positive")
    bad = [g for g in cfg.gateset if g not in GATE_KINDS]
    if bad or not cfg.gateset:
        problems.append(f"gateset: unknown or empty {list(cfg.gateset)}; choose from {GATE_KINDS}")
    if cfg.connectivity not in CONNECTIVITIES:
        problems.append(f"connectivity: {cfg.connectivity!r} is not one of {CONNECTIVITIES}")
    if cfg.max_gates < 1:
        problems.append("max_gates: must be >= 1")
    try:
        normalize_softness(cfg.softness)
    except (TypeError, ValueError) as exc:
        problems.append(f"softness: {exc}")
    if cfg.reward_weights not in REWARD_WEIGHTS:
        problems.append(f"reward_weights: {cfg.reward_weights!r} is not one of {REWARD_WEIGHTS}")
    if not cfg.seeds:
        problems.append("seeds: at least one seed is required")
    if any(not isinstance(s, int) or s < 0 for s in cfg.seeds):
        problems.append("seeds: must be non-negative integers")
    if cfg.stop_after is not None and cfg.stop_after < 1:
        problems.append("stop_after: must be >= 1")
    if not problems:
        try:
            cfg.env_config()
            cfg.env_config().gate_spec.actions()
        except EnvError as exc:
            problems.append(f"env: {exc}")
    if problems:
        raise ConfigError(problems)
    return cfg


def from_dict(raw: dict[str, Any]) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError([f"{u}: unknown field" for u in unknown])
    missing = [name for name in ("n", "k", "d", "seeds") if name not in raw]
    if missing:
        raise ConfigError([f"{m}: required" for m in missing])
    vals = {k: _tuple(v) for k, v in raw.items() if k != "hyperparams"}
    hp_raw = dict(raw.get("hyperparams") or {})
    hp_known = {f.name for f in fields(HyperParams)}
    bad_hp = sorted(set(hp_raw) - hp_known)
    if bad_hp:
        raise ConfigError([f"hyperparams.{u}: unknown field" for u in bad_hp])
    try:
        hp = HyperParams(**hp_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError([f"hyperparams: {exc}"]) from None
    try:
        cfg = RunConfig(hyperparams=hp, **vals)
    except TypeError as exc:
        raise ConfigError([str(exc)]) from None
    return validate(cfg)


def load(path: str | Path) -> RunConfig:
    text = Path(path).read_text()
    try:
        raw = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError([f"{path}: cannot parse: {exc}"]) from None
    if not isinstance(raw, dict):
        raise ConfigError([f"{path}: top level must be a mapping"])
    return from_dict(raw)


def override(cfg: RunConfig, **changes: Any) -> RunConfig:
    hp_changes = changes.pop("hyperparams", None)
    if hp_changes:
        try:
            changes["hyperparams"] = replace(cfg.hyperparams, **hp_changes)
        except ValueError as exc:
            raise ConfigError([f"hyperparams: {exc}"]) from None
    return validate(replace(cfg, **{k: v for k, v in changes.items() if v is not None}))
