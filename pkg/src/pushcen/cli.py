"""Command-line front end: single runs, method/alpha/seed matrices,
ablations, cost accounting, and standalone invariant verification.

Every output directory gets the resolved config as a JSON manifest and
the metrics CSV, so any number in a results table can be traced back to
the exact configuration hash that produced it.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .codec import comm_cost_bits
from .config import METHODS, ExperimentConfig, copy_config
from .engine import RunResult, run_experiment, staleness_report
from .ledger import LemmaCheckError
from .objectives import make_objective


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", choices=METHODS, default="pushcen")
    p.add_argument("--alpha", type=float, default=0.4,
                   help="Dirichlet concentration for the class skew")
    p.add_argument("--clients", type=int, default=20)
    p.add_argument("--fanout", type=int, default=10)
    p.add_argument("--clusters", "-K", type=int, default=32, dest="clusters")
    p.add_argument("--lambda", type=float, default=0.1, dest="lam",
                   help="proximal pull toward the centroid anchor")
    p.add_argument("--epochs", "-E", type=int, default=1)
    p.add_argument("--eta", type=float, default=0.05, help="learning rate")
    p.add_argument("--buffer-limit", "-L", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delayed-frac", type=float, default=0.10)
    p.add_argument("--events", "-T", type=int, default=10000)
    p.add_argument("--model", choices=("mlp", "logistic", "quadratic"), default="mlp")
    p.add_argument("--mean-scale", type=float, default=1.0,
                   help="class-mean separation of the synthetic mixture")
    p.add_argument("--out", type=Path, default=None, metavar="DIR")
    p.add_argument("--no-reg", action="store_true")
    p.add_argument("--no-buffer", action="store_true")


def config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig(method=args.method, seed=args.seed, model=args.model)
    cfg.data = dataclasses.replace(
        cfg.data, n_clients=args.clients, alpha=args.alpha,
        seed=args.seed, mean_scale=args.mean_scale,
    )
    cfg.topology = dataclasses.replace(cfg.topology, fanout=args.fanout)
    cfg.schedule = dataclasses.replace(
        cfg.schedule, events=args.events, delayed_fraction=args.delayed_frac)
    cfg.trainer.k = args.clusters
    cfg.trainer.lam = args.lam
    cfg.trainer.epochs = args.epochs
    cfg.trainer.eta = args.eta
    cfg.buffer_limit = args.buffer_limit
    cfg.no_reg = args.no_reg
    cfg.no_buffer = args.no_buffer
    return cfg


def _write_outputs(out: Path | None, tag: str, cfg: ExperimentConfig,
                   result: RunResult) -> None:
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{tag}_metrics.csv").write_text(result.metrics_csv())
    (out / f"{tag}_manifest.json").write_text(
        json.dumps(result.manifest, indent=2, sort_keys=True))


def _summary_line(cfg: ExperimentConfig, result: RunResult) -> str:
    last = result.rows[-1] if result.rows else {}
    return (
        f"method={cfg.method} alpha={cfg.data.alpha} seed={cfg.seed} "
        f"acc={last.get('mean_acc', float('nan')):.4f} "
        f"loss={last.get('mean_loss', float('nan')):.4f} "
        f"e_con={last.get('e_con', float('nan')):.3e} "
        f"bytes/push={result.per_push_bytes:.0f} "
        f"max_stale={last.get('max_staleness', 0)}"
    )


def cmd_run(args) -> int:
    cfg = config_from_args(args)
    result = run_experiment(cfg)
    tag = f"{cfg.method}_a{cfg.data.alpha}_s{cfg.seed}"
    _write_outputs(args.out, tag, cfg, result)
    print(_summary_line(cfg, result))
    rep = staleness_report(result)
    print(f"staleness max={rep['max']} mean={rep['mean']:.1f}")
    return 0


# -- matrix ------------------------------------------------------------


def _run_cell(cfg_dict: dict) -> dict:
    """Worker entry point: one (method, alpha, seed) simulation."""
    cfg = ExperimentConfig.from_dict(cfg_dict)
    try:
        result = run_experiment(cfg)
    except (LemmaCheckError, FloatingPointError) as exc:
        return {"method": cfg.method, "alpha": cfg.data.alpha, "seed": cfg.seed,
                "error": f"{type(exc).__name__}: {exc}"}
    last = result.rows[-1]
    accs = list(result.final_client_acc.values())
    return {
        "method": cfg.method,
        "alpha": cfg.data.alpha,
        "seed": cfg.seed,
        "final_acc": last["mean_acc"],
        "acc_sd": float(np.std(accs)) if accs else 0.0,
        "per_push_bytes": result.per_push_bytes,
        "cum_bytes": result.cum_bytes,
        "config_hash": cfg.resolve().config_hash(),
        "error": None,
    }


def _format_table(headers: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    def fmt(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    sep = "  ".join("-" * w for w in widths)
    return "\n".join([fmt(headers), sep] + [fmt(r) for r in rows])


def results_table(cells: list[dict]) -> tuple[str, str]:
    """Aggregate per-cell results over seeds; returns (text table, CSV).

    The bytes column is normalized so the compressed method reads 1.00.
    """
    good = [c for c in cells if c["error"] is None]
    keys = sorted({(c["method"], c["alpha"]) for c in good},
                  key=lambda k: (METHODS.index(k[0]), k[1]))
    base_bytes = {}
    for method, alpha in keys:
        grp = [c for c in good if c["method"] == method and c["alpha"] == alpha]
        if method == "pushcen":
            base_bytes[alpha] = np.mean([c["per_push_bytes"] for c in grp])
    rows, csv_lines = [], ["method,alpha,mean_acc,acc_sd,per_push_bytes,rel_overhead,seeds"]
    for method, alpha in keys:
        grp = [c for c in good if c["method"] == method and c["alpha"] == alpha]
        acc = float(np.mean([c["final_acc"] for c in grp]))
        sd = float(np.mean([c["acc_sd"] for c in grp]))
        ppb = float(np.mean([c["per_push_bytes"] for c in grp]))
        base = base_bytes.get(alpha, 0.0)
        rel = ppb / base if base else float("nan")
        rows.append([method, f"{alpha:g}", f"{acc:.4f}", f"{sd:.4f}",
                     f"{ppb:.0f}", f"{rel:.2f}", str(len(grp))])
        csv_lines.append(f"{method},{alpha:g},{acc:.6f},{sd:.6f},{ppb:.1f},{rel:.4f},{len(grp)}")
    failed = [c for c in cells if c["error"] is not None]
    text = _format_table(
        ["method", "alpha", "mean_acc", "acc_sd", "bytes/push", "rel_cost", "seeds"],
        rows,
    )
    if failed:
        text += "\nPARTIAL TABLE, failed cells:\n" + "\n".join(
            f"  {c['method']} alpha={c['alpha']} seed={c['seed']}: {c['error']}"
            for c in failed)
    return text, "\n".join(csv_lines) + "\n"


def cmd_matrix(args) -> int:
    base = config_from_args(args)
    alphas = args.alphas or [0.1, 0.4, 1.0]
    seeds = list(range(args.seed, args.seed + args.seeds))
    cfg_dicts = []
    for method in args.methods:
        for alpha in alphas:
            for seed in seeds:
                cfg = copy_config(base)
                cfg.method = method
                cfg.seed = seed
                cfg.data = dataclasses.replace(cfg.data, alpha=alpha, seed=seed)
                cfg_dicts.append(cfg.to_dict())
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            cells = list(pool.map(_run_cell, cfg_dicts))
    else:
        cells = [_run_cell(d) for d in cfg_dicts]
    text, csv = results_table(cells)
    print(text)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "matrix.csv").write_text(csv)
        (args.out / "matrix.txt").write_text(text + "\n")
        (args.out / "matrix_cells.json").write_text(json.dumps(cells, indent=2))
    return 1 if any(c["error"] for c in cells) else 0


def cmd_ablate(args) -> int:
    base = config_from_args(args)
    seeds = list(range(args.seed, args.seed + args.seeds))
    variants = [("full", {}), ("no_reg", {"no_reg": True}),
                ("no_buffer", {"no_buffer": True})]
    rows = []
    full_acc = None
    for name, overrides in variants:
        accs = []
        for seed in seeds:
            cfg = copy_config(base)
            cfg.seed = seed
            cfg.data = dataclasses.replace(cfg.data, seed=seed)
            for k, v in overrides.items():
                setattr(cfg, k, v)
            result = run_experiment(cfg)
            accs.append(result.rows[-1]["mean_acc"])
        mean = float(np.mean(accs))
        if name == "full":
            full_acc = mean
        rows.append([name, f"{mean:.4f}", f"{mean - full_acc:+.4f}", str(len(seeds))])
    text = _format_table(["variant", "mean_acc", "delta_vs_full", "seeds"], rows)
    print(text)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "ablation.txt").write_text(text + "\n")
    return 0


def cmd_cost(args) -> int:
    cfg = config_from_args(args)
    obj = make_objective(cfg.model, cfg.data.n_features, cfg.data.n_classes, cfg.hidden)
    full, wcp, ratio = comm_cost_bits(obj.layout, cfg.trainer.k, cfg.trainer.value_bits)
    print(f"model={cfg.model} params={obj.layout.total_length} "
          f"K={cfg.trainer.k} B={cfg.trainer.value_bits}")
    print(f"full-precision bits/push: {full} ({full // 8} bytes)")
    print(f"compressed bits/push:     {wcp} ({wcp // 8} bytes)")
    print(f"ratio: {ratio:.4f} (saving {100 * (1 - ratio):.1f}%)")
    return 0


def cmd_verify(args) -> int:
    """Run the invariant suites standalone on a reduced default config."""
    failures = []
    cfg = config_from_args(args)
    cfg.schedule = dataclasses.replace(cfg.schedule, events=args.events)
    try:
        result = run_experiment(cfg)
    except (LemmaCheckError, FloatingPointError) as exc:
        print(f"FAIL run aborted: {exc}")
        return 1

    if cfg.method == "pushcen":
        drift = result.ledger.max_mass_drift
        ok = drift <= 1e-10
        print(f"{'ok  ' if ok else 'FAIL'} mass conservation: max relative drift {drift:.3e}")
        if not ok:
            failures.append("mass conservation")
        v = result.ledger.perturbation_violations
        ok = v == 0
        print(f"{'ok  ' if ok else 'FAIL'} numerator perturbation: "
              f"{v} violations over {result.ledger.broadcasts_checked} broadcasts")
        if not ok:
            failures.append("numerator perturbation")

    twin = run_experiment(cfg)
    ok = twin.metrics_csv() == result.metrics_csv()
    print(f"{'ok  ' if ok else 'FAIL'} determinism: repeat run metrics CSV identical")
    if not ok:
        failures.append("determinism")

    rep = staleness_report(result)
    print(f"ok   staleness: max={rep['max']} mean={rep['mean']:.1f}")
    return 1 if failures else 0


def cmd_show_config(args) -> int:
    cfg = config_from_args(args)
    resolved = cfg.resolve()
    print(resolved.to_json())
    print(f"# config hash: {resolved.config_hash()}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pushcen",
        description="Asynchronous decentralized learning simulator with "
                    "push-sum gossip and clustered weight compression.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one simulation")
    _add_common_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("matrix", help="method x alpha x seed sweep")
    _add_common_flags(p)
    p.add_argument("--methods", nargs="+", choices=METHODS, default=list(METHODS))
    p.add_argument("--alphas", nargs="+", type=float, default=None)
    p.add_argument("--seeds", type=int, default=5, help="seeds per cell")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("ablate", help="full vs no_reg vs no_buffer")
    _add_common_flags(p)
    p.add_argument("--seeds", type=int, default=5)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("cost", help="per-push communication cost accounting")
    _add_common_flags(p)
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("verify", help="standalone invariant checks")
    _add_common_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("show-config", help="print the resolved config JSON")
    _add_common_flags(p)
    p.set_defaults(func=cmd_show_config)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
