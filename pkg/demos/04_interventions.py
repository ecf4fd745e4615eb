"""Characterise detected modules by saturating and negating their weights.

Uses the checkpoint and partition from demos 02/03 and prints the action
statistics table: per axis group, how often the agent takes those actions
and how they end (failure / success / continue), for the unmodified
network and for each intervention.
"""
from pathlib import Path

from modrl.detection import load_partition
from modrl.interventions import compare_interventions
from modrl.network import load_checkpoint

ckpt_path = Path("runs/demo-do/checkpoint_finetuned.json")
part_path = Path("runs/demo-do/partition_demo.json")
if not ckpt_path.exists() or not part_path.exists():
    print("run demos/02_train_sparse_policy.py and demos/03_detect_modules.py first")
    raise SystemExit(1)

net, meta = load_checkpoint(str(ckpt_path))
partition, _ = load_partition(str(part_path))
episodes = 2000

print(f"evaluating baseline + saturate/negate per module "
      f"({episodes} greedy episodes each)...")
reports = compare_interventions(net, partition, meta["env"],
                                episodes=episodes, seed=4242)

print(f"\n{'community':>9} {'mode':>9} {'return':>7}   per-group "
      f"freq% (failure/success/continue %)")
for rep in reports:
    cells = []
    for group, s in rep.groups.items():
        cells.append(f"{group} {s['freq_pct']:5.1f}% "
                     f"({s['failure_pct']:.0f}/{s['success_pct']:.0f}/"
                     f"{s['continue_pct']:.0f})")
    print(f"{rep.community:>9} {rep.mode:>9} {rep.mean_return:>7.3f}   "
          + "   ".join(cells))

base = reports[0]
for rep in reports[1:]:
    if rep.mode != "saturate":
        continue
    drops = []
    for group in base.groups:
        b = base.groups[group]["freq_pct"]
        a = rep.groups[group]["freq_pct"]
        if b > 0:
            drops.append((group, 100.0 * (b - a) / b))
    group, drop = max(drops, key=lambda t: t[1])
    print(f"\nsaturating community {rep.community} suppresses {group} "
          f"actions by {drop:.0f}% relative")
