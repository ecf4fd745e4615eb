"""Train a locality-regularised policy on Dynamic Obstacles and render it.

Runs the full pipeline (regularised PPO, magnitude pruning, fine-tuning)
at a reduced frame budget, then writes checkpoints, a metrics CSV and an
SVG per stage under runs/demo-do/. Pass a frame count to train longer:

    python demos/02_train_sparse_policy.py [total_frames]
"""
import sys
from pathlib import Path

from modrl.envs import ACTION_NAMES, observation_labels
from modrl.regularizer import RegConfig
from modrl.render import RenderStyle, render
from modrl.training import TrainConfig, evaluate, train

total = int(sys.argv[1]) if len(sys.argv) > 1 else 300_000
out = Path("runs/demo-do")

cfg = TrainConfig(total_frames=total, finetune_frames=total // 2, seed=0)
reg = RegConfig(lambda_cc=0.02)

print(f"training DO with lambda_cc={reg.lambda_cc} "
      f"({cfg.total_frames} + {cfg.finetune_frames} frames)...")
result = train("do", cfg, reg, out_dir=str(out),
               progress=lambda row: print(
                   f"  update {row['update']:>4} frames {row['frames']:>8} "
                   f"return {row['mean_return']:.2f} lambda {row['lambda']:.4f} "
                   f"sparsity {row['sparsity_frac']:.2f}", end="\r"))
print()

ret = evaluate(result.actor, "do", episodes=300, seed=9999)
print(f"greedy return (300 episodes): {ret:.3f}")
print(f"sparsity after pruning: {result.actor.sparsity():.1%} "
      f"({result.prune_report['weights_masked']} of "
      f"{result.prune_report['weights_total']} weights masked)")

style = RenderStyle(label_inputs=True, label_outputs=True)
for stage, net in (("raw", result.actor_raw), ("pruned", result.actor_pruned),
                   ("finetuned", result.actor)):
    svg = render(net, style=style, input_labels=observation_labels("do"),
                 output_labels=list(ACTION_NAMES["do"]))
    path = out / f"network_{stage}.svg"
    path.write_bytes(svg)
    print(f"wrote {path}")
print(f"checkpoints and metrics.csv are in {out}/")
