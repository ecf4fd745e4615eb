"""Pre-inference weight interventions and behavioural statistics.

A detected module is characterised empirically: its parameters are either
negatively saturated (disable) or sign-flipped (perturb), and greedy
evaluation episodes are aggregated into per-axis-group action frequencies
and outcome percentages.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .envs import axis_groups, make_env
from .graphs import Partition
from .network import SpatialMLP, forward

OUTCOMES = ("failure", "success", "continue")
CSV_COLUMNS = ("community", "mode", "group", "freq_pct", "failure_pct",
               "success_pct", "continue_pct", "mean_return")


@dataclass
class InterventionSpec:
    community: int
    mode: str                        # "saturate" or "negate"
    value: float = -50.0             # saturation value
    include_incident: bool = False   # also edit weights leaving the module

    def validate(self) -> None:
        if self.mode not in ("saturate", "negate"):
            raise ValueError(f"unknown intervention mode {self.mode!r}")


def apply_intervention(net: SpatialMLP, partition: Partition,
                       spec: InterventionSpec) -> SpatialMLP:
    """Return a copy of the net with one module's parameters modified.

    Targets every unmasked weight with both endpoints inside the community
    plus the biases of its non-input neurons. ``include_incident`` widens
    the target to weights with at least one endpoint inside (sensitivity
    variant). Raises if the target set is empty.
    """
    spec.validate()
    members = {nid for nid, c in partition.items() if c == spec.community}
    if not members:
        raise ValueError(f"community {spec.community} not present in partition")
    out = net.copy()
    edited = 0
    for l in range(out.n_weight_layers):
        w = out.weights[l]
        mask = out.weight_masks[l]
        for i in range(w.shape[0]):
            i_in = (l, i) in members
            if not i_in and not spec.include_incident:
                continue
            for j in range(w.shape[1]):
                if not mask[i, j]:
                    continue
                j_in = (l + 1, j) in members
                hit = (i_in and j_in) if not spec.include_incident \
                    else (i_in or j_in)
                if not hit:
                    continue
                w[i, j] = spec.value if spec.mode == "saturate" else -w[i, j]
                edited += 1
    for l in range(out.n_weight_layers):
        b = out.biases[l]
        for j in range(len(b)):
            if (l + 1, j) in members and out.neuron_masks[l + 1][j]:
                b[j] = spec.value if spec.mode == "saturate" else -b[j]
                edited += 1
    if edited == 0:
        raise ValueError(
            f"community {spec.community} has no editable parameters")
    return out


@dataclass
class GroupStats:
    count: int = 0
    failure: int = 0
    success: int = 0
    cont: int = 0

    def pct(self, total_actions: int) -> dict:
        freq = 100.0 * self.count / total_actions if total_actions else 0.0
        if self.count:
            f = 100.0 * self.failure / self.count
            s = 100.0 * self.success / self.count
            c = 100.0 * self.cont / self.count
        else:
            f = s = c = 0.0
        return {"freq_pct": freq, "failure_pct": f, "success_pct": s,
                "continue_pct": c}


@dataclass
class InterventionReport:
    community: str                  # label or "baseline"
    mode: str                       # "saturate", "negate" or "none"
    episodes: int
    mean_return: float
    groups: dict[str, dict] = field(default_factory=dict)


def run_intervention_eval(net: SpatialMLP, kind: str, episodes: int = 10_000,
                          seed: int = 0, env_options: dict | None = None,
                          community: str = "baseline",
                          mode: str = "none") -> InterventionReport:
    """Greedy episodes logging each action with its step outcome.

    An action counts as success when the episode ends with the goal on
    that step, failure when it ends for any other reason on that step,
    and continue otherwise. Statistics are grouped by movement axis.
    """
    groups_of = axis_groups(kind)
    group_names = sorted(set(groups_of.values()))
    stats = {g: GroupStats() for g in group_names}
    env = make_env(kind, seed, **(env_options or {}))
    total_return = 0.0
    total_actions = 0
    for _ in range(episodes):
        obs = env.reset()
        done = False
        while not done:
            action = int(np.argmax(forward(net, obs)))
            obs, r, done, cause = env.step(action)
            total_return += r
            g = stats[groups_of[action]]
            g.count += 1
            total_actions += 1
            if not done:
                g.cont += 1
            elif cause == "goal":
                g.success += 1
            else:
                g.failure += 1
    return InterventionReport(
        community=community, mode=mode, episodes=episodes,
        mean_return=total_return / episodes,
        groups={name: stats[name].pct(total_actions) for name in group_names},
    )


def compare_interventions(net: SpatialMLP, partition: Partition, kind: str,
                          episodes: int = 10_000, seed: int = 0,
                          env_options: dict | None = None,
                          saturation_value: float = -50.0,
                          include_incident: bool = False) -> list[InterventionReport]:
    """Baseline plus saturate/negate for every community: 1 + 2|P| reports."""
    reports = [run_intervention_eval(net, kind, episodes, seed, env_options)]
    labels = sorted(set(partition.values()))
    for mode in ("saturate", "negate"):
        for c in labels:
            spec = InterventionSpec(community=c, mode=mode,
                                    value=saturation_value,
                                    include_incident=include_incident)
            edited = apply_intervention(net, partition, spec)
            reports.append(run_intervention_eval(
                edited, kind, episodes, seed, env_options,
                community=str(c), mode=mode))
    return reports


def write_intervention_csv(reports: list[InterventionReport], path: str,
                           checkpoint_hash: str = "", partition_hash: str = "",
                           seed: int = 0) -> None:
    lines = [f"# checkpoint_hash={checkpoint_hash} "
             f"partition_hash={partition_hash} seed={seed}"]
    lines.append(",".join(CSV_COLUMNS))
    for rep in reports:
        for group, pct in rep.groups.items():
            row = [rep.community, rep.mode, group,
                   str(pct["freq_pct"]), str(pct["failure_pct"]),
                   str(pct["success_pct"]), str(pct["continue_pct"]),
                   str(rep.mean_return)]
            lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")
