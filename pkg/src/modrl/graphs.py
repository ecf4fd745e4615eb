"""Weighted graphs over neurons, Newman modularity and Louvain partitioning.

The structural graph connects adjacent-layer neurons with |weight| edges;
the functional graph is the complete graph of |Pearson correlation| between
activation traces, so its edges are not constrained to adjacent layers.
Zero-degree neurons are excluded from the node list and reported in
``excluded`` so downstream metrics can skip them.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import ActivationTrace, NeuronId, SpatialMLP

Partition = dict[NeuronId, int]


@dataclass
class WeightedGraph:
    nodes: list[NeuronId]
    adj: np.ndarray                      # symmetric, non-negative, zero diagonal
    excluded: list[NeuronId] = field(default_factory=list)

    def __post_init__(self):
        self.index = {n: i for i, n in enumerate(self.nodes)}

    @property
    def degrees(self) -> np.ndarray:
        return self.adj.sum(axis=1)

    @property
    def total_weight(self) -> float:
        """m: half the adjacency sum."""
        return float(self.adj.sum()) / 2.0

    def subgraph(self, keep: list[NeuronId]) -> "WeightedGraph":
        idx = [self.index[n] for n in keep]
        return WeightedGraph(list(keep), self.adj[np.ix_(idx, idx)])


def structural_graph(net: SpatialMLP) -> WeightedGraph:
    """Undirected |weight| graph over all unmasked neurons with any edge."""
    alive = [(l, i) for l, mask in enumerate(net.neuron_masks)
             for i in range(len(mask)) if mask[i]]
    if not alive:
        raise ValueError("fully masked network has no structural graph")
    index = {n: i for i, n in enumerate(alive)}
    adj = np.zeros((len(alive), len(alive)))
    for l in range(net.n_weight_layers):
        w = np.abs(net.effective_weights(l))
        rows, cols = np.nonzero(w)
        for i, j in zip(rows, cols):
            a, b = index[(l, int(i))], index[(l + 1, int(j))]
            adj[a, b] += w[i, j]
            adj[b, a] += w[i, j]
    deg = adj.sum(axis=1)
    live = deg > 0.0
    nodes = [n for n, keep in zip(alive, live) if keep]
    excluded = [n for n, keep in zip(alive, live) if not keep]
    return WeightedGraph(nodes, adj[np.ix_(live.nonzero()[0], live.nonzero()[0])],
                         excluded=excluded)


def correlation_matrix(trace: ActivationTrace) -> tuple[np.ndarray, np.ndarray]:
    """Pearson correlations between all traced neurons.

    Returns (r, zero_variance_flags). Zero-variance neurons get r = 0
    against everything (including themselves); all other diagonals are 1.
    """
    if trace.n_samples < 2:
        raise ValueError("need at least 2 samples for correlations")
    x = trace.data
    centered = x - x.mean(axis=0)
    norm = np.sqrt((centered * centered).sum(axis=0))
    flat = norm <= 1e-12 * np.maximum(1.0, np.abs(x.mean(axis=0)))
    safe = np.where(flat, 1.0, norm)
    r = (centered.T @ centered) / np.outer(safe, safe)
    r[flat, :] = 0.0
    r[:, flat] = 0.0
    keep = ~flat
    r[keep, keep] = 1.0
    return r, flat


def functional_graph(trace: ActivationTrace) -> WeightedGraph:
    """Complete |correlation| graph over traced neurons.

    Zero-variance neurons have no edges and are reported as excluded, the
    same convention as zero-degree neurons in the structural graph.
    """
    r, flat = correlation_matrix(trace)
    adj = np.abs(r)
    np.fill_diagonal(adj, 0.0)
    ids = trace.neuron_ids()
    keep = ~flat
    nodes = [n for n, k in zip(ids, keep) if k]
    excluded = [n for n, k in zip(ids, keep) if not k]
    sel = keep.nonzero()[0]
    return WeightedGraph(nodes, adj[np.ix_(sel, sel)], excluded=excluded)


def modularity_q(graph: WeightedGraph, partition: Partition) -> float:
    """Newman modularity of a partition against the degree-preserving null."""
    m = graph.total_weight
    if m <= 0.0:
        raise ValueError("modularity undefined for graphs with no edge weight")
    labels = np.empty(len(graph.nodes), dtype=np.int64)
    for i, n in enumerate(graph.nodes):
        if n not in partition:
            raise ValueError(f"partition does not cover node {n}")
        labels[i] = partition[n]
    k = graph.degrees
    q = 0.0
    for c in np.unique(labels):
        inside = labels == c
        sigma_in = float(graph.adj[np.ix_(inside, inside)].sum())
        sigma_tot = float(k[inside].sum())
        q += sigma_in / (2.0 * m) - (sigma_tot / (2.0 * m)) ** 2
    return q


def _one_level(adj: np.ndarray, rng: np.random.Generator,
               init: np.ndarray | None = None) -> np.ndarray:
    """Louvain local-move phase on a graph that may carry self-loops.

    Starts from singletons unless ``init`` labels are given (used for the
    node-level refinement sweeps between aggregation rounds).
    """
    n = len(adj)
    two_m = float(adj.sum())
    k = adj.sum(axis=1)
    comm = np.arange(n) if init is None else init.copy()
    sigma_tot = np.zeros(int(comm.max()) + 1)
    np.add.at(sigma_tot, comm, k)
    neighbors = [np.nonzero(adj[i])[0] for i in range(n)]
    neighbors = [nb[nb != i] for i, nb in enumerate(neighbors)]
    moved = True
    while moved:
        moved = False
        for i in rng.permutation(n):
            ci = comm[i]
            sigma_tot[ci] -= k[i]
            best_c, best_gain = ci, -np.inf
            scores: dict[int, float] = {ci: 0.0}
            for j in neighbors[i]:
                scores[comm[j]] = scores.get(comm[j], 0.0) + adj[i, j]
            for c in sorted(scores):
                gain = scores[c] - sigma_tot[c] * k[i] / two_m
                if gain > best_gain + 1e-12:
                    best_gain, best_c = gain, c
            sigma_tot[best_c] += k[i]
            if best_c != ci:
                comm[i] = best_c
                moved = True
    return comm


def _labels_q(adj: np.ndarray, labels: np.ndarray) -> float:
    two_m = float(adj.sum())
    k = adj.sum(axis=1)
    q = 0.0
    for c in np.unique(labels):
        inside = labels == c
        q += adj[np.ix_(inside, inside)].sum() / two_m \
            - (k[inside].sum() / two_m) ** 2
    return q


def _relabel(labels: np.ndarray) -> np.ndarray:
    seen: dict[int, int] = {}
    out = np.empty_like(labels)
    for i, c in enumerate(labels):
        out[i] = seen.setdefault(int(c), len(seen))
    return out


def _aggregate(adj: np.ndarray, comm: np.ndarray) -> np.ndarray:
    k = int(comm.max()) + 1
    ind = np.zeros((len(adj), k))
    ind[np.arange(len(adj)), comm] = 1.0
    return ind.T @ adj @ ind


def _polish(adj: np.ndarray, rng: np.random.Generator, labels: np.ndarray,
            q: float) -> tuple[np.ndarray, float]:
    """Aggregation rounds with node-level refinement, while Q improves."""
    while True:
        agg = _aggregate(adj, labels)
        coarse = _relabel(_one_level(agg, rng))
        cand = _relabel(_one_level(adj, rng, init=coarse[labels]))
        q_new = _labels_q(adj, cand)
        if q_new > q + 1e-12:
            labels, q = cand, q_new
        else:
            return labels, q


def _louvain_once(adj: np.ndarray, rng: np.random.Generator,
                  ils_rounds: int) -> np.ndarray:
    """One seeded run: two-phase Louvain plus iterated local search.

    After the hierarchy converges, a fraction of nodes is randomly
    reassigned and the local phase re-run; the perturbed solution is kept
    only when it improves modularity. This escapes the local optima that
    plain restarts keep falling back into on small dense graphs.
    """
    n = len(adj)
    labels = _relabel(_one_level(adj, rng))
    labels, q = _polish(adj, rng, labels, _labels_q(adj, labels))
    for _ in range(ils_rounds):
        pert = labels.copy()
        n_comm = int(pert.max()) + 1
        for v in rng.choice(n, size=max(2, n // 3), replace=False):
            pert[v] = rng.integers(n_comm + 1)
        cand = _relabel(_one_level(adj, rng, init=_relabel(pert)))
        cand, q_cand = _polish(adj, rng, cand, _labels_q(adj, cand))
        if q_cand > q + 1e-12:
            labels, q = cand, q_cand
    return labels


def louvain(graph: WeightedGraph, seed: int, restarts: int = 8,
            ils_rounds: int = 12) -> Partition:
    """Seeded Louvain returning the best of several perturbed restarts.

    Node visit order is shuffled per pass from the seed, so results are
    reproducible. Labels are contiguous from 0 in node order.
    """
    if graph.total_weight <= 0.0:
        raise ValueError("louvain needs a graph with positive edge weight")
    ss = seed if isinstance(seed, np.random.SeedSequence) \
        else np.random.SeedSequence(seed)
    best_labels, best_q = None, -np.inf
    for child in ss.spawn(restarts):
        labels = _louvain_once(graph.adj, np.random.default_rng(child),
                               ils_rounds)
        q = _labels_q(graph.adj, labels)
        if q > best_q + 1e-12:
            best_q, best_labels = q, labels
    return {n: int(best_labels[i]) for i, n in enumerate(graph.nodes)}


def internal_louvain(graph: WeightedGraph, input_nodes: list[NeuronId],
                     seed: int, restarts: int = 8) -> Partition:
    """Louvain with input neurons attached after partitioning.

    The graph minus the given input nodes is partitioned first; each input
    then takes the label of the community it is most strongly connected to
    (ties to the lower label). Inputs with no edge into any community are
    left out of the returned partition.
    """
    inputs = [n for n in input_nodes if n in graph.index]
    input_set = set(inputs)
    rest = [n for n in graph.nodes if n not in input_set]
    if not rest:
        raise ValueError("no non-input nodes to partition")
    part = louvain(graph.subgraph(rest), seed, restarts=restarts)
    labels = sorted(set(part.values()))
    out = dict(part)
    for n in inputs:
        row = graph.adj[graph.index[n]]
        strength = {c: 0.0 for c in labels}
        for other in rest:
            w = row[graph.index[other]]
            if w > 0.0:
                strength[part[other]] += w
        best_c, best_w = None, 0.0
        for c in labels:
            if strength[c] > best_w:
                best_c, best_w = c, strength[c]
        if best_c is not None:
            out[n] = best_c
    return out
