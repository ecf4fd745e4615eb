"""Command-line entry point: train | detect | intervene | sweep | render | eval.

Artifacts chain through content hashes: checkpoints embed their config
hash, partitions embed their checkpoint hash, and intervention CSVs embed
both. A command refuses inputs whose recorded hashes do not match what it
recomputes. Relative output paths are rooted at $MODRL_OUT when set.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path


from .artifacts import file_hash
from .config import (
    RunConfig,
    apply_overrides,
    list_presets,
    load_preset,
    run_config_from_dict,
)
from .detection import detect_modules, load_partition, save_partition
from .envs import ACTION_NAMES, observation_labels
from .interventions import compare_interventions, write_intervention_csv
from .network import collect_trace, load_checkpoint, load_trace, save_trace
from .render import RenderStyle, render
from .training import evaluate, train


def _resolve_out(path: str | None, default: str) -> str:
    p = path if path is not None else default
    root = os.environ.get("MODRL_OUT")
    if root and not os.path.isabs(p):
        return os.path.join(root, p)
    return p


def _load_run_config(args) -> RunConfig:
    if args.config is None and args.preset is None:
        raise ValueError("provide --config FILE or --preset NAME")
    if args.config is not None and args.preset is not None:
        raise ValueError("--config and --preset are mutually exclusive")
    data = load_preset(args.preset) if args.preset else \
        json.loads(Path(args.config).read_text())
    apply_overrides(data, args.set or [])
    cfg = run_config_from_dict(data)
    if getattr(args, "out", None):
        cfg.out_dir = args.out
    cfg.out_dir = _resolve_out(None, cfg.out_dir)
    return cfg


def cmd_train(args) -> int:
    cfg = _load_run_config(args)
    run_hash = cfg.hash()
    for seed in cfg.seeds:
        cfg.train.seed = seed
        out_dir = str(Path(cfg.out_dir) / f"seed{seed}")
        result = train(cfg.env.kind, cfg.train, cfg.reg,
                       env_options=cfg.env.options(), out_dir=out_dir,
                       run_hash=run_hash)
        final = result.metrics[-1]["mean_return"] if result.metrics else 0.0
        print(f"seed {seed}: frames={result.metrics[-1]['frames'] if result.metrics else 0} "
              f"mean_return={final:.3f} sparsity={result.actor.sparsity():.3f} "
              f"-> {out_dir}")
    return 0


def _trace_base(out_dir: Path, ckpt_hash: str, seed: int, episodes: int) -> str:
    return str(out_dir / f"trace_{ckpt_hash}_s{seed}_e{episodes}")


def _load_or_collect_trace(net, meta, ckpt_hash, out_dir, episodes, seed):
    base = _trace_base(out_dir, ckpt_hash, seed, episodes)
    if Path(base + ".npy").exists() and Path(base + ".json").exists():
        trace = load_trace(base)
        if trace.meta.get("checkpoint_hash") == ckpt_hash:
            return trace, base, True
    trace = collect_trace(net, meta["env"], episodes, seed,
                          **meta.get("env_options", {}))
    trace.meta["checkpoint_hash"] = ckpt_hash
    save_trace(trace, base)
    return trace, base, False


def cmd_detect(args) -> int:
    net, meta = load_checkpoint(args.checkpoint)
    ckpt_hash = file_hash(args.checkpoint)
    if meta.get("stage") not in (None, "finetuned"):
        print(f"warning: detecting on stage={meta.get('stage')!r} checkpoint",
              file=sys.stderr)
    out_dir = Path(_resolve_out(args.out, str(Path(args.checkpoint).parent)))
    out_dir.mkdir(parents=True, exist_ok=True)
    trace, base, cached = _load_or_collect_trace(
        net, meta, ckpt_hash, out_dir, args.episodes, args.seed)
    partition, report = detect_modules(net, trace, args.method, args.seed)
    part_path = out_dir / f"partition_{ckpt_hash}_{args.method}_s{args.seed}.json"
    save_partition(partition, report, str(part_path),
                   checkpoint_hash=ckpt_hash, trace_meta=trace.meta,
                   seed=args.seed)
    print(f"trace: {base} ({'cached' if cached else 'collected'}, "
          f"{trace.n_samples} samples)")
    print(f"partition: {part_path}")
    print(f"method={args.method} communities={report.n_communities} "
          f"isolation={report.isolation:.4f} ari={report.ari:.4f} "
          f"q={report.q:.4f} M={report.m_score:.4f}")
    return 0


def cmd_intervene(args) -> int:
    net, meta = load_checkpoint(args.checkpoint)
    ckpt_hash = file_hash(args.checkpoint)
    partition, doc = load_partition(args.partition)
    if doc.get("checkpoint_hash") != ckpt_hash:
        raise ValueError(
            f"stale partition: recorded checkpoint hash "
            f"{doc.get('checkpoint_hash')} != {ckpt_hash}")
    part_hash = file_hash(args.partition)
    reports = compare_interventions(
        net, partition, meta["env"], episodes=args.episodes, seed=args.seed,
        env_options=meta.get("env_options", {}),
        saturation_value=args.saturation_value,
        include_incident=args.include_incident)
    out = _resolve_out(args.out,
                       str(Path(args.partition).parent /
                           f"interventions_{part_hash}.csv"))
    write_intervention_csv(reports, out, checkpoint_hash=ckpt_hash,
                           partition_hash=part_hash, seed=args.seed)
    print(f"{len(reports)} reports ({args.episodes} episodes each) -> {out}")
    for rep in reports:
        freqs = " ".join(f"{g}={s['freq_pct']:.1f}%"
                         for g, s in rep.groups.items())
        print(f"  community={rep.community} mode={rep.mode} "
              f"return={rep.mean_return:.3f} {freqs}")
    return 0


def cmd_sweep(args) -> int:
    from .sweep import run_sweep

    cfg = _load_run_config(args)
    lambdas = [float(x) for x in args.lambdas.split(",")]
    seeds = [int(x) for x in args.seeds.split(",")] if args.seeds else cfg.seeds
    out_dir = _resolve_out(args.out, str(Path(cfg.out_dir) / "sweep"))

    def progress(row):
        status = "ok" if row["ok"] else f"FAILED ({row['error']})"
        print(f"lambda={row['lambda']:g} seed={row['seed']}: {status} "
              f"return={row['return']:.3f} isolation={row['isolation']:.3f} "
              f"ari={row['ari']:.3f}", flush=True)

    rows, agg = run_sweep(cfg, lambdas, seeds, out_dir, progress=progress)
    failures = [r for r in rows if not r["ok"]]
    print(f"{len(rows)} runs, {len(failures)} failures -> {out_dir}")
    return 0 if not failures else 1


def cmd_render(args) -> int:
    net, meta = load_checkpoint(args.checkpoint)
    ckpt_hash = file_hash(args.checkpoint)
    partition = None
    suffix = ""
    if args.partition:
        partition, doc = load_partition(args.partition)
        if doc.get("checkpoint_hash") != ckpt_hash:
            raise ValueError("partition was produced from a different checkpoint")
        suffix = "_part"
    style = RenderStyle(label_inputs=args.labels, label_outputs=args.labels)
    kind = meta.get("env")
    in_labels = out_labels = None
    if args.labels and kind:
        in_labels = observation_labels(kind, meta.get("mask_opponent", False))
        out_labels = list(ACTION_NAMES[kind])
    out_dir = Path(_resolve_out(args.out, str(Path(args.checkpoint).parent)))
    out_dir.mkdir(parents=True, exist_ok=True)
    note = f"checkpoint={ckpt_hash} config_hash={meta.get('config_hash', '')}"
    if args.partition:
        note += f" partition={file_hash(args.partition)}"
    data = render(net, partition, style, args.format,
                  input_labels=in_labels, output_labels=out_labels,
                  annotation=note)
    path = out_dir / f"render_{ckpt_hash}{suffix}.{args.format}"
    path.write_bytes(data)
    print(f"{path}")
    return 0


def cmd_eval(args) -> int:
    net, meta = load_checkpoint(args.checkpoint)
    mean = evaluate(net, meta["env"], args.episodes, args.seed,
                    env_options=meta.get("env_options", {}))
    print(f"mean_return={mean}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="modrl",
        description="Train sparse spatially-regularised RL policies, detect "
                    "their functional modules, and characterise them with "
                    "weight interventions.")
    sub = p.add_subparsers(dest="command", required=True)

    def add_config_opts(sp):
        sp.add_argument("--config", help="run config JSON file")
        sp.add_argument("--preset", help=f"built-in preset: {list_presets()}")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config field, e.g. reg.lambda_cc=0.05")
        sp.add_argument("--out", help="output directory override")

    sp = sub.add_parser("train", help="run the full train/prune/finetune pipeline")
    add_config_opts(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("detect", help="detect modules in a checkpoint")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--method", default="ft_internal",
                    choices=["louvain", "internal", "ft", "ft_internal"])
    sp.add_argument("--episodes", type=int, default=200,
                    help="trace episodes (cached per checkpoint/seed)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="output directory (default: checkpoint dir)")
    sp.set_defaults(func=cmd_detect)

    sp = sub.add_parser("intervene",
                        help="saturate/negate every module and tabulate behaviour")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--partition", required=True)
    sp.add_argument("--episodes", type=int, default=2000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--saturation-value", type=float, default=-50.0)
    sp.add_argument("--include-incident", action="store_true",
                    help="also edit weights crossing the module boundary")
    sp.add_argument("--out", help="output CSV path")
    sp.set_defaults(func=cmd_intervene)

    sp = sub.add_parser("sweep", help="lambda x seed grid of full pipelines")
    add_config_opts(sp)
    sp.add_argument("--lambdas", required=True,
                    help="comma-separated lambda_cc values")
    sp.add_argument("--seeds", help="comma-separated seeds (default: config)")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("render", help="render a checkpoint to SVG or DOT")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--partition", help="colour nodes by this partition")
    sp.add_argument("--format", default="svg", choices=["svg", "dot"])
    sp.add_argument("--labels", action="store_true",
                    help="label input features and output actions")
    sp.add_argument("--out", help="output directory (default: checkpoint dir)")
    sp.set_defaults(func=cmd_render)

    sp = sub.add_parser("eval", help="greedy evaluation of a checkpoint")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--episodes", type=int, default=300)
    sp.add_argument("--seed", type=int, default=9999)
    sp.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, RuntimeError, KeyError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
