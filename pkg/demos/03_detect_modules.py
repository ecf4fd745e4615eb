"""Detect functional modules in a trained checkpoint, comparing methods.

Loads the fine-tuned checkpoint produced by demos/02_train_sparse_policy.py
(or trains a quick one if missing), collects an activation trace, and
compares standard Louvain against the internal and merge-fine-tuned
variants on isolation, correlation alignment (ARI) and modularity Q.
"""
from pathlib import Path

from modrl.detection import detect_modules, save_partition
from modrl.network import collect_trace, load_checkpoint

ckpt_path = Path("runs/demo-do/checkpoint_finetuned.json")
if not ckpt_path.exists():
    print("no checkpoint found; run demos/02_train_sparse_policy.py first")
    raise SystemExit(1)

net, meta = load_checkpoint(str(ckpt_path))
print(f"loaded {ckpt_path} (env={meta['env']}, lambda_cc={meta['lambda_cc']}, "
      f"stage={meta['stage']})")

print("collecting activation trace (500 greedy episodes)...")
trace = collect_trace(net, meta["env"], episodes=500, seed=777)
print(f"{trace.n_samples} samples x {trace.data.shape[1]} neurons")

print(f"\n{'method':<12} {'modules':>7} {'isolation':>10} {'ARI':>7} "
      f"{'Q':>7} {'M=I+ARI':>8}")
results = {}
for method in ("louvain", "internal", "ft", "ft_internal"):
    partition, report = detect_modules(net, trace, method, seed=5)
    results[method] = (partition, report)
    print(f"{method:<12} {report.n_communities:>7} {report.isolation:>10.3f} "
          f"{report.ari:>7.3f} {report.q:>7.3f} {report.m_score:>8.3f}")

partition, report = results["ft_internal"]
out = ckpt_path.parent / "partition_demo.json"
save_partition(partition, report, str(out), seed=5)
print(f"\nwrote {out}")
for label in sorted(set(partition.values())):
    members = sorted(n for n, c in partition.items() if c == label)
    ins = [i for (l, i) in members if l == 0]
    outs = [i for (l, i) in members if l == len(net.layer_sizes) - 1]
    print(f"module {label}: {len(members)} neurons, inputs {ins}, actions {outs}")
