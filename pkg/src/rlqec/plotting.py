"""Static figures for training curves, family censuses and noise sweeps."""

from __future__ import annotations

import os
import tempfile
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .analysis import Family, SweepRow  # noqa: E402


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.stem}.", suffix=path.suffix)
    os.close(fd)
    fig.savefig(tmp, dpi=120, bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)
    os.replace(tmp, path)
    return path


def plot_training(metrics: Mapping[int, Sequence[dict]], path: str | Path) -> Path:
    """Mean return and mean circuit size per epoch, one line per seed."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.2))
    for seed, rows in sorted(metrics.items()):
        ep = [r["epoch"] for r in rows if r["mean_return"] is not None]
        ax1.plot(ep, [r["mean_return"] for r in rows if r["mean_return"] is not None], label=f"seed {seed}", lw=1)
        ax2.plot(ep, [r["mean_circuit_size"] for r in rows if r["mean_circuit_size"] is not None], lw=1)
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("mean return")
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("mean circuit size")
    if metrics:
        ax1.legend(fontsize=7)
    return _save(fig, path)


def plot_families(families: Sequence[Family], path: str | Path) -> Path:
    """Occurrences per family with the minimal circuit size on a twin axis."""
    fig, ax = plt.subplots(figsize=(max(4, 0.5 * len(families) + 2), 3.2))
    ids = np.arange(1, len(families) + 1)
    labels = [f"{f.family_id}{'*' if f.degenerate else ''}" for f in families]
    ax.bar(ids, [f.occurrences for f in families], color="tab:blue")
    ax.set_xticks(ids, labels)
    ax.set_xlabel("family (* degenerate)")
    ax.set_ylabel("occurrences")
    sizes = [f.min_circuit_size for f in families]
    if any(s is not None for s in sizes):
        ax2 = ax.twinx()
        ax2.plot(ids, [np.nan if s is None else s for s in sizes], "o", color="tab:orange")
        ax2.set_ylabel("min circuit size")
    return _save(fig, path)


def plot_sweep(rows: Sequence[SweepRow], path: str | Path) -> Path:
    """KL sum and d_e against c_Z, and p_f against 1 - p_I on log axes."""
    fig, (ax1, ax2, ax3) = plt.subplots(1, 3, figsize=(11, 3.2))
    for p_i in sorted({r.p_i for r in rows}):
        sel = sorted((r for r in rows if r.p_i == p_i), key=lambda r: r.c_z)
        cz = [r.c_z for r in sel]
        ax1.plot(cz, [r.kl_sum for r in sel], "o-", label=f"p_I={p_i:g}")
        ax2.step(cz, [r.d_e for r in sel], where="mid")
    ax1.set_xlabel("c_Z")
    ax1.set_ylabel("weighted KL sum")
    ax1.legend(fontsize=7)
    ax2.set_xlabel("c_Z")
    ax2.set_ylabel("d_e")
    for c_z in sorted({r.c_z for r in rows}):
        sel = sorted((r for r in rows if r.c_z == c_z), key=lambda r: r.p_i)
        q = [1 - r.p_i for r in sel]
        pf = [r.p_f for r in sel]
        if len(sel) > 1 and all(v > 0 for v in pf):
            ax3.loglog(q, pf, "o-", label=f"c_Z={c_z:g}")
    ax3.set_xlabel("1 - p_I")
    ax3.set_ylabel("p_f")
    if ax3.lines:
        ax3.legend(fontsize=7)
    return _save(fig, path)
