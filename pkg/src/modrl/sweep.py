"""Regularisation-strength sweeps: full pipeline per (lambda, seed) cell.

Each cell trains, prunes, fine-tunes, evaluates the greedy return, collects
an activation trace and detects modules. Cells that fail are recorded with
their error and the sweep continues; aggregates are computed over the
successful cells per lambda.
"""
from __future__ import annotations

import copy
import csv
import math
from pathlib import Path

from .config import RunConfig
from .detection import detect_modules
from .network import collect_trace
from .training import evaluate, train

RUN_COLUMNS = ("lambda", "seed", "return", "isolation", "ari", "sparsity",
               "n_communities", "ok", "error")
AGG_COLUMNS = ("lambda", "n", "return_mean", "return_std", "isolation_mean",
               "isolation_std", "ari_mean", "ari_std", "sparsity_mean",
               "sparsity_std")


def run_cell(base: RunConfig, lam: float, seed: int,
             out_dir: str | None = None) -> dict:
    """One sweep cell: train + evaluate + detect. Returns a result row."""
    cfg = copy.deepcopy(base)
    cfg.reg.lambda_cc = lam
    cfg.train.seed = seed
    row = {"lambda": lam, "seed": seed, "return": math.nan,
           "isolation": math.nan, "ari": math.nan, "sparsity": math.nan,
           "n_communities": 0, "ok": True, "error": ""}
    try:
        result = train(cfg.env.kind, cfg.train, cfg.reg,
                       env_options=cfg.env.options(), out_dir=out_dir,
                       run_hash=cfg.hash())
        row["return"] = evaluate(result.actor, cfg.env.kind,
                                 cfg.eval.episodes, cfg.eval.seed,
                                 env_options=cfg.env.options())
        row["sparsity"] = result.actor.sparsity()
        trace = collect_trace(result.actor, cfg.env.kind,
                              cfg.detect.episodes, cfg.detect.seed,
                              **cfg.env.options())
        _, report = detect_modules(result.actor, trace, cfg.detect.method,
                                   cfg.detect.seed)
        row["isolation"] = report.isolation
        row["ari"] = report.ari
        row["n_communities"] = report.n_communities
    except Exception as exc:  # record and continue with the other cells
        row["ok"] = False
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def aggregate_rows(rows: list[dict]) -> list[dict]:
    """Mean/std per lambda over the successful cells."""
    byl: dict[float, list[dict]] = {}
    for r in rows:
        if r["ok"]:
            byl.setdefault(r["lambda"], []).append(r)
    out = []
    for lam in sorted(byl):
        cells = byl[lam]
        agg = {"lambda": lam, "n": len(cells)}
        for key in ("return", "isolation", "ari", "sparsity"):
            vals = [c[key] for c in cells]
            mean = sum(vals) / len(vals)
            var = sum((v - mean) ** 2 for v in vals) / len(vals)
            agg[f"{key}_mean"] = mean
            agg[f"{key}_std"] = math.sqrt(var)
        out.append(agg)
    return out


def _write_csv(path: Path, columns, rows: list[dict], header: str) -> None:
    with open(path, "w", newline="") as f:
        f.write(header + "\n")
        writer = csv.DictWriter(f, fieldnames=columns)
        writer.writeheader()
        for r in rows:
            writer.writerow({c: r[c] for c in columns})


def run_sweep(base: RunConfig, lambdas: list[float], seeds: list[int],
              out_dir: str, progress=None,
              keep_checkpoints: bool = True) -> tuple[list[dict], list[dict]]:
    """Run the lambda x seed grid; write runs.csv and aggregate.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for lam in lambdas:
        for seed in seeds:
            cell_dir = out / f"lam{lam:g}_seed{seed}" if keep_checkpoints else None
            row = run_cell(base, lam, seed,
                           out_dir=str(cell_dir) if cell_dir else None)
            rows.append(row)
            if progress is not None:
                progress(row)
    agg = aggregate_rows(rows)
    header = f"# config_hash={base.hash()} seeds={','.join(map(str, seeds))}"
    _write_csv(out / "runs.csv", RUN_COLUMNS, rows, header)
    _write_csv(out / "aggregate.csv", AGG_COLUMNS, agg, header)
    return rows, agg
