"""Module metrics (isolation, ARI) and the merge-based partition fine-tuning.

``detect_modules`` is the entry point: it builds the structural and
functional graphs, partitions both (standard or internal Louvain), and for
the ``ft*`` methods greedily merges adjacent structural modules while the
combined score M = isolation + correlation alignment keeps improving.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .graphs import (
    Partition,
    functional_graph,
    internal_louvain,
    louvain,
    modularity_q,
    structural_graph,
)
from .network import ActivationTrace, NeuronId, SpatialMLP

DETECTION_METHODS = ("louvain", "internal", "ft", "ft_internal")


def isolation(net: SpatialMLP, partition: Partition) -> tuple[float, dict[int, float]]:
    """Fraction of each community's incident |weight| that stays internal.

    Weights touching a neuron outside the partition count as external for
    the assigned side. A single-community partition scores 0 by definition.
    """
    labels = sorted(set(partition.values()))
    w_int = {c: 0.0 for c in labels}
    w_ext = {c: 0.0 for c in labels}
    for l in range(net.n_weight_layers):
        w = np.abs(net.effective_weights(l))
        rows, cols = np.nonzero(w)
        for i, j in zip(rows, cols):
            ca = partition.get((l, int(i)))
            cb = partition.get((l + 1, int(j)))
            value = float(w[i, j])
            if ca is None and cb is None:
                continue
            if ca == cb:
                w_int[ca] += value
            else:
                if ca is not None:
                    w_ext[ca] += value
                if cb is not None:
                    w_ext[cb] += value
    per_comm = {}
    for c in labels:
        denom = w_int[c] + w_ext[c]
        per_comm[c] = w_int[c] / denom if denom > 0.0 else 0.0
    if len(labels) <= 1:
        return 0.0, per_comm
    return float(np.mean(list(per_comm.values()))), per_comm


def ari(p1: Partition, p2: Partition) -> float:
    """Adjusted Rand index (Hubert-Arabie) between two partitions."""
    if set(p1) != set(p2):
        raise ValueError("partitions cover different node sets")
    n = len(p1)
    counts: dict[tuple[int, int], int] = {}
    a_sizes: dict[int, int] = {}
    b_sizes: dict[int, int] = {}
    for node, ca in p1.items():
        cb = p2[node]
        counts[(ca, cb)] = counts.get((ca, cb), 0) + 1
        a_sizes[ca] = a_sizes.get(ca, 0) + 1
        b_sizes[cb] = b_sizes.get(cb, 0) + 1
    index = sum(comb(v, 2) for v in counts.values())
    sum_a = sum(comb(v, 2) for v in a_sizes.values())
    sum_b = sum(comb(v, 2) for v in b_sizes.values())
    expected = sum_a * sum_b / comb(n, 2) if n >= 2 else 0.0
    max_index = (sum_a + sum_b) / 2.0
    if max_index == expected:
        return 1.0  # both partitions trivial in the same way
    return (index - expected) / (max_index - expected)


def _ari_common(p1: Partition, p2: Partition) -> float:
    common = set(p1) & set(p2)
    if len(common) < 2:
        return 0.0
    return ari({n: p1[n] for n in common}, {n: p2[n] for n in common})


@dataclass
class ModularityReport:
    isolation: float
    ari: float
    q: float
    m_score: float
    per_community: dict[int, float]
    n_communities: int
    method: str = ""
    unassigned: list[NeuronId] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "isolation": self.isolation,
            "ari": self.ari,
            "q": self.q,
            "m_score": self.m_score,
            "per_community": {str(k): v for k, v in sorted(self.per_community.items())},
            "n_communities": self.n_communities,
            "method": self.method,
            "unassigned": [f"{l}:{i}" for l, i in sorted(self.unassigned)],
        }


def _make_report(net, graph, partition, p_func, method, unassigned) -> ModularityReport:
    iso, per_comm = isolation(net, partition)
    alignment = _ari_common(partition, p_func)
    return ModularityReport(
        isolation=iso, ari=alignment, q=modularity_q(graph, partition),
        m_score=iso + alignment, per_community=per_comm,
        n_communities=len(set(partition.values())), method=method,
        unassigned=list(unassigned),
    )


def relabel_contiguous(partition: Partition) -> Partition:
    """Relabel communities 0..k-1 in order of first appearance (sorted nodes)."""
    mapping: dict[int, int] = {}
    out = {}
    for node in sorted(partition):
        c = partition[node]
        out[node] = mapping.setdefault(c, len(mapping))
    return out


def _module_adjacency(net: SpatialMLP, partition: Partition) -> set[tuple[int, int]]:
    """Pairs of communities linked by at least one unmasked weight."""
    pairs = set()
    for l in range(net.n_weight_layers):
        w = np.abs(net.effective_weights(l))
        rows, cols = np.nonzero(w)
        for i, j in zip(rows, cols):
            ca = partition.get((l, int(i)))
            cb = partition.get((l + 1, int(j)))
            if ca is not None and cb is not None and ca != cb:
                pairs.add((min(ca, cb), max(ca, cb)))
    return pairs


def finetune_partition(net: SpatialMLP, p_s: Partition,
                       p_f: Partition) -> tuple[Partition, "ModularityReport"]:
    """Greedily merge adjacent structural modules while M = I + ARI improves.

    Only pairs connected by an unmasked weight are considered. Each
    accepted merge strictly increases M, so the loop terminates after at
    most |P|-1 merges.
    """
    current = dict(p_s)
    m_now = isolation(net, current)[0] + _ari_common(current, p_f)
    while True:
        best_m, best_pair = m_now, None
        for a, b in sorted(_module_adjacency(net, current)):
            merged = {n: (a if c == b else c) for n, c in current.items()}
            m_try = isolation(net, merged)[0] + _ari_common(merged, p_f)
            if m_try > best_m + 1e-12:
                best_m, best_pair = m_try, (a, b)
        if best_pair is None:
            final = relabel_contiguous(current)
            report = _make_report(net, structural_graph(net), final, p_f, "ft", [])
            return final, report
        a, b = best_pair
        current = {n: (a if c == b else c) for n, c in current.items()}
        m_now = best_m


def detect_modules(net: SpatialMLP, trace: ActivationTrace, method: str,
                   seed: int) -> tuple[Partition, ModularityReport]:
    """Partition the structural graph and score it against the functional one.

    Methods: ``louvain`` (standard on both graphs), ``internal`` (input
    neurons attached post hoc), ``ft`` / ``ft_internal`` (the same
    initialisations followed by merge fine-tuning).
    """
    if method not in DETECTION_METHODS:
        raise ValueError(f"unknown detection method {method!r}")
    g_s = structural_graph(net)
    g_f = functional_graph(trace)
    s_struct, s_func = np.random.SeedSequence(seed).spawn(2)
    inputs = [(0, i) for i in range(net.layer_sizes[0])]

    if method in ("internal", "ft_internal"):
        p_s = internal_louvain(g_s, inputs, s_struct)
        p_f = internal_louvain(g_f, inputs, s_func)
    else:
        p_s = louvain(g_s, s_struct)
        p_f = louvain(g_f, s_func)

    if method in ("ft", "ft_internal"):
        p_s, _ = finetune_partition(net, p_s, p_f)
    else:
        p_s = relabel_contiguous(p_s)

    unassigned = list(g_s.excluded) + [n for n in g_s.nodes if n not in p_s]
    report = _make_report(net, g_s, p_s, p_f, method, unassigned)
    return p_s, report


PARTITION_FORMAT = "modrl-partition-v1"


def save_partition(partition: Partition, report: ModularityReport, path: str,
                   checkpoint_hash: str = "", trace_meta: dict | None = None,
                   seed: int | None = None) -> None:
    doc = {
        "format": PARTITION_FORMAT,
        "checkpoint_hash": checkpoint_hash,
        "trace_meta": dict(trace_meta or {}),
        "seed": seed,
        "assignments": {f"{l}:{i}": int(c)
                        for (l, i), c in sorted(partition.items())},
        "report": report.to_dict(),
    }
    with open(path, "w") as f:
        json.dump(doc, f, sort_keys=True, indent=1)
        f.write("\n")


def load_partition(path: str) -> tuple[Partition, dict]:
    with open(path) as f:
        doc = json.load(f)
    if doc.get("format") != PARTITION_FORMAT:
        raise ValueError(f"not a {PARTITION_FORMAT} file")
    part = {}
    for key, c in doc["assignments"].items():
        l, i = key.split(":")
        part[(int(l), int(i))] = int(c)
    return part, doc
