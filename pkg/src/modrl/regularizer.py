"""Distance-weighted sparsity loss, its schedule, and neuron relocation.

The loss sums ``log((d_ij - d_s)|w| + 1)`` over all unmasked weights, where
``d_ij`` is the planar distance between the two neurons a weight connects.
``d_s`` shifts the distance term so that near-vertical weights are almost
free. An ``l1`` variant drops the log; ``distance_weighted=False`` replaces
``(d_ij - d_s)`` by 1, leaving a pure sparsity penalty.

Only weights are penalised, never biases, and the critic is never passed
through these functions by the trainer.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import NeuronId, SpatialMLP


@dataclass
class RegConfig:
    lambda_cc: float = 0.0          # target strength; scheduled during training
    d_s: float = 0.95
    penalty: str = "log"            # "log" or "l1"
    distance_weighted: bool = True
    schedule_start: float = 0.2     # fractions of phase-1 training steps
    schedule_end: float = 0.3
    relocate_k: int = 10            # swap candidates per layer
    relocate_every: int = 2         # in PPO updates; 0 disables relocation

    def validate(self) -> None:
        if self.lambda_cc < 0:
            raise ValueError("lambda_cc must be >= 0")
        if not 0.0 <= self.schedule_start <= self.schedule_end <= 1.0:
            raise ValueError("schedule window must satisfy 0 <= start <= end <= 1")
        if self.penalty not in ("log", "l1"):
            raise ValueError(f"unknown penalty {self.penalty!r}")
        if self.relocate_k < 0 or self.relocate_every < 0:
            raise ValueError("relocation parameters must be >= 0")
        if self.d_s >= 1.0:
            raise ValueError("d_s must be < 1 so adjacent-layer distances stay positive")


def neuron_distance(net: SpatialMLP, a: NeuronId, b: NeuronId) -> float:
    """Euclidean distance between neurons in adjacent layers."""
    (la, ia), (lb, ib) = a, b
    if lb != la + 1:
        raise ValueError(f"neurons {a} and {b} are not in adjacent layers")
    dx = net.x_coords[lb][ib] - net.x_coords[la][ia]
    return float(np.sqrt(dx * dx + 1.0))


def distance_matrix(net: SpatialMLP, l: int) -> np.ndarray:
    """Distances for weight layer l, shape (n_l, n_{l+1})."""
    dx = net.x_coords[l + 1][None, :] - net.x_coords[l][:, None]
    return np.sqrt(dx * dx + 1.0)


def _coef(net: SpatialMLP, l: int, cfg: RegConfig):
    if cfg.distance_weighted:
        return distance_matrix(net, l) - cfg.d_s
    return 1.0


def connection_cost(net: SpatialMLP, cfg: RegConfig, lam: float | None = None) -> float:
    """Total locality loss over all unmasked weights, scaled by lambda."""
    lam = cfg.lambda_cc if lam is None else lam
    total = 0.0
    for l in range(net.n_weight_layers):
        inner = _coef(net, l, cfg) * np.abs(net.effective_weights(l))
        if cfg.penalty == "log":
            if np.any(inner <= -1.0):
                raise ValueError("connection-cost term <= -1; log undefined")
            total += float(np.log1p(inner).sum())
        else:
            total += float(inner.sum())
    return lam * total


def connection_cost_grad(net: SpatialMLP, cfg: RegConfig,
                         lam: float | None = None) -> list[np.ndarray]:
    """d(connection_cost)/dW per weight layer; masked entries are zero."""
    lam = cfg.lambda_cc if lam is None else lam
    grads = []
    for l in range(net.n_weight_layers):
        w = net.effective_weights(l)
        coef = _coef(net, l, cfg)
        if cfg.penalty == "log":
            g = lam * coef * np.sign(w) / (coef * np.abs(w) + 1.0)
        else:
            g = lam * coef * np.sign(w)
        grads.append(g * net.weight_masks[l])
    return grads


def schedule_lambda(step: int, total: int, cfg: RegConfig) -> float:
    """Linear ramp from 0 to the target inside the configured window."""
    if not 0 <= step <= total:
        raise ValueError("step outside [0, total]")
    p = step / total if total > 0 else 1.0
    s, e = cfg.schedule_start, cfg.schedule_end
    if p <= s:
        return 0.0
    if p >= e:
        return cfg.lambda_cc
    return cfg.lambda_cc * (p - s) / (e - s)


def weighted_degrees(net: SpatialMLP, layer: int) -> np.ndarray:
    """Sum of absolute unmasked incident weights for every neuron in a layer."""
    n = net.layer_sizes[layer]
    deg = np.zeros(n)
    if layer > 0:
        deg += np.abs(net.effective_weights(layer - 1)).sum(axis=0)
    if layer < net.n_weight_layers:
        deg += np.abs(net.effective_weights(layer)).sum(axis=1)
    return deg


def weighted_degree(net: SpatialMLP, n: NeuronId) -> float:
    layer, idx = n
    return float(weighted_degrees(net, layer)[idx])


def _pen(inner: np.ndarray, cfg: RegConfig) -> np.ndarray:
    return np.log1p(inner) if cfg.penalty == "log" else inner


def _swap_deltas(net: SpatialMLP, cfg: RegConfig, layer: int, cand: int) -> np.ndarray:
    """Cost change of swapping x-coords of ``cand`` with every in-layer partner.

    Only terms touching the swapped pair change, and the pair shares no
    weight (no intra-layer connections), so the delta over their incident
    weights is exact. Returns one delta per partner index.
    """
    x = net.x_coords[layer]
    n = len(x)
    cand_at = np.zeros(n)      # candidate's incident cost if moved to x[i]
    other_at_xc = np.zeros(n)  # neuron i's incident cost if moved to x[cand]
    other_now = np.zeros(n)    # neuron i's incident cost at its own x
    if layer > 0:
        w_in = np.abs(net.effective_weights(layer - 1))        # (n_prev, n)
        dx = x[:, None] - net.x_coords[layer - 1][None, :]
        dist = np.sqrt(dx * dx + 1.0) - cfg.d_s                # (n, n_prev)
        cand_at += _pen(dist * w_in[:, cand][None, :], cfg).sum(axis=1)
        other_at_xc += _pen(dist[cand][:, None] * w_in, cfg).sum(axis=0)
        other_now += _pen(dist * w_in.T, cfg).sum(axis=1)
    if layer < net.n_weight_layers:
        w_out = np.abs(net.effective_weights(layer))           # (n, n_next)
        dx = x[:, None] - net.x_coords[layer + 1][None, :]
        dist = np.sqrt(dx * dx + 1.0) - cfg.d_s                # (n, n_next)
        cand_at += _pen(dist * w_out[cand][None, :], cfg).sum(axis=1)
        other_at_xc += _pen(dist[cand][None, :] * w_out, cfg).sum(axis=1)
        other_now += _pen(dist * w_out, cfg).sum(axis=1)
    deltas = (cand_at + other_at_xc) - (cand_at[cand] + other_now)
    deltas[cand] = 0.0
    return deltas


def relocate_neurons(net: SpatialMLP, cfg: RegConfig) -> SpatialMLP:
    """Greedy in-layer x-coordinate swapping of high-degree neurons.

    For every layer (input to output), the ``relocate_k`` neurons with the
    highest weighted degree each swap coordinates with the in-layer partner
    giving the greatest strict decrease in connection cost, or stay put.
    Weights are untouched; the total cost never increases. Mutates the
    network in place and returns it.
    """
    if cfg.relocate_k == 0 or cfg.lambda_cc == 0.0 or not cfg.distance_weighted:
        return net  # cost is coordinate-independent or zero; nothing to gain
    for layer in range(len(net.layer_sizes)):
        deg = weighted_degrees(net, layer)
        n = len(deg)
        order = np.lexsort((np.arange(n), -deg))  # desc degree, ties by index
        for cand in order[: min(cfg.relocate_k, n)]:
            deltas = _swap_deltas(net, cfg, layer, int(cand))
            best = int(np.argmin(deltas))
            # margin keeps float noise from triggering cost-neutral swaps
            if deltas[best] < -1e-12:
                x = net.x_coords[layer]
                x[cand], x[best] = x[best], x[cand]
    return net
