"""Independent brute-force oracles used to check the library implementations.

These deliberately avoid the code paths they verify: modularity search
enumerates every set partition, the ARI oracle counts node pairs directly,
and the advantage oracle sums the discounted-delta series term by term.
"""
import numpy as np


def exhaustive_best_q(adj: np.ndarray) -> float:
    """Maximum Newman modularity over every partition of the graph.

    Enumerates set partitions via restricted growth (node v joins an
    existing block or opens a new one), carrying the modularity sum
    incrementally. Feasible up to ~12 nodes.
    """
    n = len(adj)
    two_m = float(adj.sum())
    if two_m <= 0:
        raise ValueError("graph has no edges")
    k = adj.sum(axis=1)
    b = adj - np.outer(k, k) / two_m
    best = -np.inf
    block_rows: list[np.ndarray] = []   # per block: sum of b rows of members

    def assign(v: int, total: float) -> None:
        nonlocal best
        if v == n:
            if total > best:
                best = total
            return
        for i, row in enumerate(block_rows):
            gain = 2.0 * row[v] + b[v, v]
            block_rows[i] = row + b[v]
            assign(v + 1, total + gain)
            block_rows[i] = row
        block_rows.append(b[v].copy())
        assign(v + 1, total + b[v, v])
        block_rows.pop()

    assign(0, 0.0)
    return best / two_m


def partition_q(adj: np.ndarray, labels) -> float:
    """Direct double-sum evaluation of Eq-style modularity for a labelling."""
    two_m = float(adj.sum())
    k = adj.sum(axis=1)
    q = 0.0
    n = len(adj)
    for i in range(n):
        for j in range(n):
            if labels[i] == labels[j]:
                q += adj[i, j] - k[i] * k[j] / two_m
    return q / two_m


def pair_counting_ari(labels_a, labels_b) -> float:
    """Adjusted Rand index from raw pair agreement counts (no contingency)."""
    n = len(labels_a)
    assert len(labels_b) == n
    both = a_only = b_only = neither = 0
    for i in range(n):
        for j in range(i + 1, n):
            sa = labels_a[i] == labels_a[j]
            sb = labels_b[i] == labels_b[j]
            if sa and sb:
                both += 1
            elif sa:
                a_only += 1
            elif sb:
                b_only += 1
            else:
                neither += 1
    num = 2.0 * (both * neither - a_only * b_only)
    den = ((both + a_only) * (a_only + neither)
           + (both + b_only) * (b_only + neither))
    if den == 0:
        return 1.0
    return num / den


def direct_gae(rewards, values, dones, last_values, gamma, lam):
    """O(T^2) term-by-term advantage sums, truncated at episode ends."""
    n_envs, steps = rewards.shape
    adv = np.zeros((n_envs, steps))
    for e in range(n_envs):
        for t in range(steps):
            total = 0.0
            factor = 1.0
            for l in range(t, steps):
                nonterm = 1.0 - dones[e, l]
                next_v = values[e, l + 1] if l + 1 < steps else last_values[e]
                delta = rewards[e, l] + gamma * next_v * nonterm - values[e, l]
                total += factor * delta
                if dones[e, l]:
                    break
                factor *= gamma * lam
            adv[e, t] = total
    return adv


def random_graph(rng: np.random.Generator, n: int, p: float = 0.5):
    """Random symmetric weighted graph with at least one edge."""
    while True:
        mask = rng.random((n, n)) < p
        w = rng.uniform(0.2, 1.5, size=(n, n))
        adj = np.triu(mask * w, k=1)
        adj = adj + adj.T
        if adj.sum() > 0:
            return adj
