"""Command line entry point: ``rlqec <verb> ...``.

Exit codes: 0 ok, 1 configuration error, 2 verification mismatch,
3 runtime fault.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import analysis, bench, oracles
from .config import ConfigError, from_dict, load, override
from .env import Circuit, EnvError, prune
from .pipeline import atomic_write, run_discovery, write_artifacts

EXIT_OK, EXIT_CONFIG, EXIT_MISMATCH, EXIT_FAULT = 0, 1, 2, 3


def _softness(text: str) -> int | str:
    return text if text in ("exact", "off") else int(text)


def _emit(text: str, out: str | None) -> None:
    if out:
        atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _load_circuits(paths: Sequence[str]) -> list[Circuit]:
    files: list[Path] = []
    for p in map(Path, paths):
        files.extend(sorted(p.glob("*.json")) if p.is_dir() else [p])
    return [Circuit.from_json(f.read_text()) for f in files]


# ---------------------------------------------------------------------------
# Verbs


def cmd_discover(args: argparse.Namespace) -> int:
    if args.config:
        cfg = load(args.config)
    else:
        need = [f for f in ("n", "k", "d", "seeds") if getattr(args, f) is None]
        if need:
            raise ConfigError([f"{f}: required without --config" for f in need])
        cfg = from_dict({"n": args.n, "k": args.k, "d": args.d, "seeds": args.seeds})
    hp = {k: v for k, v in (("num_epochs", args.epochs), ("num_envs", args.num_envs)) if v is not None}
    cfg = override(
        cfg,
        n=args.n, k=args.k, d=args.d, seeds=tuple(args.seeds) if args.seeds else None,
        mode=args.mode, p_i=args.p_i, c_z=args.c_z,
        c_z_grid=tuple(args.c_z_grid) if args.c_z_grid else None,
        gateset=tuple(args.gateset) if args.gateset else None,
        connectivity=args.connectivity, max_gates=args.max_gates, softness=args.softness,
        hadamard_qubits=tuple(args.hadamard) if args.hadamard else None,
        stop_after=args.stop_after, output_dir=args.out, hyperparams=hp,
    )

    def progress(row: dict, res) -> bool:
        if args.verbose and row["epoch"] % 50 == 0:
            print(f"seed {res.seed} epoch {row['epoch']} return {row['mean_return']} "
                  f"size {row['mean_circuit_size']} found {len(res.found)}", file=sys.stderr)
        return False

    run = run_discovery(cfg, progress)
    write_artifacts(run, cfg.output_dir, plots=not args.no_plots)
    print(json.dumps(run.summary(), sort_keys=True))
    return EXIT_OK


def cmd_classify(args: argparse.Namespace) -> int:
    circuits = _load_circuits(args.paths)
    fams = analysis.classify_families([c.tableau() for c in circuits], [len(c) for c in circuits])
    _emit(analysis.family_report_csv(fams), args.out)
    if args.plot and fams:
        from .plotting import plot_families

        plot_families(fams, args.plot)
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    (circuit,) = _load_circuits([args.circuit])
    grid = [(c, p) for c in args.c_z for p in args.p_i]
    rows = analysis.evaluate_sweep(circuit.tableau(), grid, args.d, args.softness, args.max_weight)
    _emit(analysis.sweep_csv(rows), args.out)
    if args.plot:
        from .plotting import plot_sweep

        plot_sweep(rows, args.plot)
    return EXIT_OK


def cmd_prune(args: argparse.Namespace) -> int:
    (circuit,) = _load_circuits([args.circuit])
    out = prune(circuit)
    out.meta = {**circuit.meta, "pruned_from": len(circuit)}
    _emit(out.to_json(), args.out)
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    if args.n > 6:
        raise ConfigError([f"n: oracle budget is n <= 6, got {args.n}"])
    rng = np.random.default_rng(args.seed)
    checks = {
        "kl": lambda: [oracles.check_kl(args.n, args.k, args.cases, rng, softness=s) for s in ("exact", 1, 2)],
        "qwe": lambda: [oracles.check_qwe(args.n, args.k, args.cases, rng)],
        "pf": lambda: [oracles.check_failure(args.n, args.k, min(args.cases, 20), rng, p, c)
                       for p, c in ((0.9, 1.0), (0.95, 0.5), (0.9, 2.0))],
        "distance": lambda: [oracles.check_distance(args.n, args.k, args.cases, rng, c) for c in (1.0, 0.5, 2.0)],
    }
    which = list(checks) if args.check == "all" else [args.check]
    reports = [r for name in which for r in checks[name]()]
    for r in reports:
        status = "ok" if r.ok else "MISMATCH"
        print(f"{status:8s} {r.name}: {r.mismatches}/{r.cases} mismatches {r.detail}".rstrip())
    return EXIT_OK if all(r.ok for r in reports) else EXIT_MISMATCH


def cmd_bench(args: argparse.Namespace) -> int:
    rows = []
    for b in args.batch:
        row, _, _ = bench.run(args.n, args.gates, b, args.seed)
        rows.append(row)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "batch", "gates", "seconds", "gates_per_second"])
    for r in rows:
        w.writerow([r.n, r.batch, r.gates, f"{r.seconds:.6f}", f"{r.gates_per_second:.1f}"])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rlqec", description="Stabilizer code and encoder discovery with RL.")
    sub = p.add_subparsers(dest="verb", required=True)

    d = sub.add_parser("discover", help="train agents and collect encoding circuits")
    d.add_argument("--config", help="JSON or YAML run configuration")
    d.add_argument("--n", type=int)
    d.add_argument("--k", type=int)
    d.add_argument("--d", type=int)
    d.add_argument("--seeds", type=int, nargs="+")
    d.add_argument("--mode", choices=("fixed_target", "meta", "css"))
    d.add_argument("--p-i", dest="p_i", type=float)
    d.add_argument("--c-z", dest="c_z", type=float)
    d.add_argument("--c-z-grid", dest="c_z_grid", type=float, nargs="+")
    d.add_argument("--gateset", nargs="+")
    d.add_argument("--connectivity")
    d.add_argument("--max-gates", dest="max_gates", type=int)
    d.add_argument("--softness", type=_softness)
    d.add_argument("--hadamard", type=int, nargs="+", help="css mode: qubits of the Hadamard block")
    d.add_argument("--epochs", type=int)
    d.add_argument("--num-envs", dest="num_envs", type=int)
    d.add_argument("--stop-after", dest="stop_after", type=int)
    d.add_argument("--out")
    d.add_argument("--no-plots", action="store_true")
    d.add_argument("-v", "--verbose", action="store_true")
    d.set_defaults(func=cmd_discover)

    c = sub.add_parser("classify", help="family report from circuit files")
    c.add_argument("paths", nargs="*")
    c.add_argument("--out")
    c.add_argument("--plot")
    c.set_defaults(func=cmd_classify)

    e = sub.add_parser("evaluate", help="KL sum, d_e and p_f over a (c_Z, p_I) grid")
    e.add_argument("circuit")
    e.add_argument("--c-z", dest="c_z", type=float, nargs="+", default=[1.0])
    e.add_argument("--p-i", dest="p_i", type=float, nargs="+", default=[0.9])
    e.add_argument("--d", type=int, default=3)
    e.add_argument("--softness", type=_softness, default="exact")
    e.add_argument("--max-weight", dest="max_weight", type=int)
    e.add_argument("--out")
    e.add_argument("--plot")
    e.set_defaults(func=cmd_evaluate)

    pr = sub.add_parser("prune", help="shorten a circuit without changing its code")
    pr.add_argument("circuit")
    pr.add_argument("--out")
    pr.set_defaults(func=cmd_prune)

    o = sub.add_parser("oracle", help="compare fast paths with brute-force references")
    o.add_argument("check", choices=("kl", "qwe", "pf", "distance", "all"))
    o.add_argument("--n", type=int, default=4)
    o.add_argument("--k", type=int, default=1)
    o.add_argument("--cases", type=int, default=200)
    o.add_argument("--seed", type=int, default=0)
    o.set_defaults(func=cmd_oracle)

    b = sub.add_parser("bench", help="batched gate throughput on random streams")
    b.add_argument("--n", type=int, default=40)
    b.add_argument("--gates", type=int, default=1000)
    b.add_argument("--batch", type=int, nargs="+", default=[1, 16, 256, 1024])
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for msg in exc.problems:
            print(f"config error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except (EnvError, analysis.DimensionError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"runtime fault: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
