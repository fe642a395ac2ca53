"""Discovery runs: train agents per seed, collect circuits, write artifacts."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .analysis import Family, classify_families, family_counts, family_report_csv
from .config import RunConfig
from .env import Circuit, prune
from .ppo import TrainResult, greedy_rollout, save_checkpoint, train


def atomic_write(path: str | Path, data: str | bytes) -> None:
    """Write to a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data.encode() if isinstance(data, str) else data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class DiscoveryRun:
    cfg: RunConfig
    results: list[TrainResult] = field(default_factory=list)
    circuits: list[Circuit] = field(default_factory=list)
    greedy: list[Circuit] = field(default_factory=list)
    families: list[Family] = field(default_factory=list)

    @property
    def config_hash(self) -> str:
        return self.cfg.hash()

    def summary(self) -> dict[str, Any]:
        nd, dg = family_counts(self.families)
        gnd, gdg = family_counts(self.families, genuine_only=True)
        sizes = [len(c) for c in self.circuits]
        return {
            "config_hash": self.config_hash,
            "n": self.cfg.n,
            "k": self.cfg.k,
            "d": self.cfg.d,
            "mode": self.cfg.mode,
            "seeds": list(self.cfg.seeds),
            "codes_found": len(self.circuits),
            "seeds_successful": len({c.meta["seed"] for c in self.circuits if c.meta.get("success")}),
            "families": len(self.families),
            "families_xy": [nd, dg],
            "genuine_families": gnd + gdg,
            "genuine_families_xy": [gnd, gdg],
            "min_circuit_size": min(sizes) if sizes else None,
        }


def run_seed(cfg: RunConfig, seed: int, on_epoch: Callable[[dict, TrainResult], bool] | None = None) -> TrainResult:
    def hook(row: dict, res: TrainResult) -> bool:
        stop = on_epoch(row, res) if on_epoch else False
        if cfg.stop_after is not None and len(res.found) >= cfg.stop_after:
            stop = True
        return bool(stop)

    return train(cfg.env_config(), cfg.hyperparams, seed, on_epoch=hook)


def circuits_from(cfg: RunConfig, res: TrainResult) -> list[Circuit]:
    h = cfg.hash()
    out = []
    for rec in res.found:
        c = res.env.circuit(0, rec.actions)
        if cfg.prune:
            c = prune(c)
        c.meta = {
            "config_hash": h,
            "seed": rec.seed,
            "epoch": rec.epoch,
            "kl_sum": rec.kl_sum,
            "c_z": rec.c_z,
            "success": rec.success,
            "raw_size": len(rec.actions) + len(cfg.hadamard_qubits),
        }
        out.append(c)
    return out


def run_discovery(cfg: RunConfig, on_epoch: Callable[[dict, TrainResult], bool] | None = None) -> DiscoveryRun:
    run = DiscoveryRun(cfg)
    env_cfg = cfg.env_config()
    for seed in cfg.seeds:
        res = run_seed(cfg, seed, on_epoch)
        run.results.append(res)
        run.circuits.extend(circuits_from(cfg, res))
        if cfg.mode == "meta":
            for c_z in cfg.c_z_grid:
                acts = greedy_rollout(res.net, env_cfg, c_z)
                c = res.env.circuit(0, acts)
                c.meta = {"config_hash": cfg.hash(), "seed": seed, "c_z": c_z, "greedy": True}
                run.greedy.append(c)
    if cfg.mode != "meta":
        run.families = classify_families([c.tableau() for c in run.circuits], [len(c) for c in run.circuits])
    return run


def metrics_jsonl(run: DiscoveryRun) -> str:
    h = run.config_hash
    lines = []
    for res in run.results:
        for row in res.metrics:
            lines.append(json.dumps({"seed": res.seed, **row, "config_hash": h}, sort_keys=True))
    return "\n".join(lines) + ("\n" if lines else "")


def write_artifacts(run: DiscoveryRun, out: str | Path, plots: bool = True) -> dict[str, Path]:
    out = Path(out)
    h = run.config_hash
    paths: dict[str, Path] = {}
    atomic_write(out / "config.json", json.dumps({**run.cfg.to_dict(), "config_hash": h}, sort_keys=True, indent=1) + "\n")
    for kind, circuits in (("circuits", run.circuits), ("greedy", run.greedy)):
        blocks = []
        for i, c in enumerate(circuits):
            name = f"seed{c.meta['seed']}-{i:04d}.json"
            atomic_write(out / kind / name, c.to_json())
            blocks.append(f"# {kind}/{name} config_hash={h}\n" + c.tableau().to_text())
        if circuits:
            atomic_write(out / f"{kind}_tableaus.txt", "".join(blocks))
    paths["metrics"] = out / "metrics.jsonl"
    atomic_write(paths["metrics"], metrics_jsonl(run))
    if run.cfg.mode != "meta":
        csv_text = family_report_csv(run.families)
        lines = csv_text.splitlines()
        lines[0] += ",config_hash"
        lines[1:] = [ln + f",{h}" for ln in lines[1:]]
        paths["families"] = out / "families.csv"
        atomic_write(paths["families"], "\n".join(lines) + "\n")
    for res in run.results:
        tmp = out / f".agent-seed{res.seed}.npz"
        tmp.parent.mkdir(parents=True, exist_ok=True)
        save_checkpoint(str(tmp), res.net, h)
        os.replace(tmp, out / f"agent-seed{res.seed}.npz")
    paths["summary"] = out / "summary.json"
    atomic_write(paths["summary"], json.dumps(run.summary(), sort_keys=True, indent=1) + "\n")
    if plots:
        from .plotting import plot_families, plot_training

        paths["training_plot"] = plot_training({r.seed: r.metrics for r in run.results}, out / "training.png")
        if run.families:
            paths["families_plot"] = plot_families(run.families, out / "families.png")
    return paths
