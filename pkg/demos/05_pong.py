"""Short-game Pong: learn a positive score differential, then train blind.

Trains a small policy on first-to-5 Pong against the follow-ball opponent,
reports the mean score differential, and retrains with the opponent's
paddle position masked out of the observation (the robust variant, which
cannot rely on the opponent mirroring the ball).

    python demos/05_pong.py [total_frames]
"""
import sys

from modrl.regularizer import RegConfig
from modrl.training import TrainConfig, evaluate, train

total = int(sys.argv[1]) if len(sys.argv) > 1 else 400_000
base_opts = {"points_to_win": 5, "max_ticks": 3000}

for masked in (False, True):
    opts = dict(base_opts, mask_opponent=masked)
    label = "masked (no opponent position)" if masked else "full observation"
    cfg = TrainConfig(hidden=[16, 16], total_frames=total, finetune_frames=0,
                      seed=0)
    print(f"\ntraining pong, {label}, {total} frames...")
    result = train("pong", cfg, RegConfig(), env_options=opts,
                   progress=lambda row: print(
                       f"  update {row['update']:>4} "
                       f"score diff {row['mean_return']:+.2f}", end="\r"))
    print()
    diff = evaluate(result.actor, "pong", episodes=30, seed=321,
                    env_options=opts)
    print(f"{label}: mean score differential over 30 games: {diff:+.2f} "
          f"(positive = agent outscores the follow-ball opponent)")
