"""Spatially embedded MLP: forward passes, exact backprop, traces, checkpoints.

Neurons are addressed as ``(layer, index)`` tuples. Every neuron carries an
x-coordinate in [0, 1]; the y-coordinate is its layer index. Coordinates
only matter to the locality regulariser and the renderer, never to the
forward pass.

Weight matrix ``weights[l]`` has shape ``(n_l, n_{l+1})``: row i, column j
connects neuron ``(l, i)`` to ``(l+1, j)``. Masks are boolean "keep" flags;
masked weights are stored as exact zeros and their gradients are forced to
zero, so a pruned network stays pruned under further training.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .envs import make_env

NeuronId = tuple[int, int]

ACTIVATIONS = ("tanh", "relu")


def _act(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        return np.tanh(z)
    return np.maximum(z, 0.0)


def _dact_from_output(a: np.ndarray, kind: str) -> np.ndarray:
    # derivative expressed through the post-activation value
    if kind == "tanh":
        return 1.0 - a * a
    return (a > 0.0).astype(a.dtype)


@dataclass
class SpatialMLP:
    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]          # biases[l] belongs to layer l+1
    x_coords: list[np.ndarray]        # one array per neuron layer
    weight_masks: list[np.ndarray]    # bool, True = weight kept
    neuron_masks: list[np.ndarray]    # bool, True = neuron kept
    activation: str = "tanh"

    @property
    def n_weight_layers(self) -> int:
        return len(self.weights)

    def neuron_ids(self) -> list[NeuronId]:
        return [(l, i) for l, n in enumerate(self.layer_sizes) for i in range(n)]

    def effective_weights(self, l: int) -> np.ndarray:
        return self.weights[l] * self.weight_masks[l]

    def effective_bias(self, l: int) -> np.ndarray:
        return self.biases[l] * self.neuron_masks[l + 1]

    def apply_masks(self) -> None:
        """Fold neuron masks into weight masks and zero masked storage.

        Idempotent; establishes the invariant that a masked neuron has all
        incident weights masked and its bias stored as exactly 0.
        """
        for l in range(self.n_weight_layers):
            self.weight_masks[l] &= np.outer(self.neuron_masks[l],
                                             self.neuron_masks[l + 1])
            self.weights[l] *= self.weight_masks[l]
            self.biases[l] *= self.neuron_masks[l + 1]

    def copy(self) -> "SpatialMLP":
        return SpatialMLP(
            layer_sizes=list(self.layer_sizes),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            x_coords=[x.copy() for x in self.x_coords],
            weight_masks=[m.copy() for m in self.weight_masks],
            neuron_masks=[m.copy() for m in self.neuron_masks],
            activation=self.activation,
        )

    def sparsity(self) -> float:
        """Fraction of weights currently masked out."""
        masked = sum(int((~m).sum()) for m in self.weight_masks)
        total = sum(m.size for m in self.weight_masks)
        return masked / total


def uniform_coords(n: int) -> np.ndarray:
    return np.arange(n, dtype=np.float64) / n


def _orthogonal(rng: np.random.Generator, rows: int, cols: int, gain: float) -> np.ndarray:
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


def init_network(shape: list[int], seed: int, hidden_gain: float = np.sqrt(2.0),
                 out_gain: float = 0.01, activation: str = "tanh") -> SpatialMLP:
    """Orthogonally initialised network with zero biases and grid coordinates."""
    if any(n <= 0 for n in shape):
        raise ValueError(f"zero-size layer in shape {shape}")
    if activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}")
    rng = np.random.default_rng(seed)
    L = len(shape) - 1
    weights, biases, wmasks = [], [], []
    for l in range(L):
        gain = out_gain if l == L - 1 else hidden_gain
        weights.append(_orthogonal(rng, shape[l], shape[l + 1], gain))
        biases.append(np.zeros(shape[l + 1]))
        wmasks.append(np.ones((shape[l], shape[l + 1]), dtype=bool))
    return SpatialMLP(
        layer_sizes=list(shape),
        weights=weights,
        biases=biases,
        x_coords=[uniform_coords(n) for n in shape],
        weight_masks=wmasks,
        neuron_masks=[np.ones(n, dtype=bool) for n in shape],
        activation=activation,
    )


def forward(net: SpatialMLP, obs: np.ndarray, record: bool = False):
    """Compute logits; with ``record`` also return per-layer activations.

    Accepts a single observation (1-D) or a batch (2-D). Recorded
    activations are ``[inputs, hidden..., logits]`` as 2-D arrays.
    """
    x = np.asarray(obs, dtype=np.float64)
    single = x.ndim == 1
    a = x[None, :] if single else x
    if a.shape[1] != net.layer_sizes[0]:
        raise ValueError(
            f"observation length {a.shape[1]} != input size {net.layer_sizes[0]}")
    L = net.n_weight_layers
    acts = [a]
    for l in range(L):
        z = a @ net.effective_weights(l) + net.effective_bias(l)
        a = _act(z, net.activation) if l < L - 1 else z
        acts.append(a)
    logits = acts[-1][0] if single else acts[-1]
    if record:
        return logits, acts
    return logits


def backward(net: SpatialMLP, acts: list[np.ndarray], dlogits: np.ndarray):
    """Reverse-mode gradients of a scalar loss given d(loss)/d(logits).

    ``acts`` is the cache from ``forward(..., record=True)``. Returns
    (weight grads, bias grads) with masked parameters forced to zero.
    """
    L = net.n_weight_layers
    dW: list[np.ndarray] = [None] * L
    db: list[np.ndarray] = [None] * L
    g = dlogits
    for l in range(L - 1, -1, -1):
        dW[l] = (acts[l].T @ g) * net.weight_masks[l]
        db[l] = g.sum(axis=0) * net.neuron_masks[l + 1]
        if l > 0:
            g = (g @ net.effective_weights(l).T) * _dact_from_output(
                acts[l], net.activation)
    return dW, db


def get_params(net: SpatialMLP) -> np.ndarray:
    """Flatten all weights then all biases into one vector."""
    parts = [w.ravel() for w in net.weights] + [b.ravel() for b in net.biases]
    return np.concatenate(parts)


def set_params(net: SpatialMLP, vec: np.ndarray) -> None:
    i = 0
    for w in net.weights:
        w[...] = vec[i:i + w.size].reshape(w.shape)
        i += w.size
    for b in net.biases:
        b[...] = vec[i:i + b.size]
        i += b.size


@dataclass
class ActivationTrace:
    """Per-step activations of every neuron over a set of episodes."""
    data: np.ndarray                 # (T, sum of layer sizes), float64
    layer_sizes: list[int]
    meta: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return self.data.shape[0]

    def column_of(self, nid: NeuronId) -> int:
        layer, idx = nid
        return sum(self.layer_sizes[:layer]) + idx

    def neuron_ids(self) -> list[NeuronId]:
        return [(l, i) for l, n in enumerate(self.layer_sizes) for i in range(n)]


def collect_trace(net: SpatialMLP, kind: str, episodes: int = 10_000,
                  seed: int = 0, mask_opponent: bool = False,
                  **env_kw) -> ActivationTrace:
    """Roll greedy-policy episodes and record one activation row per step."""
    env = make_env(kind, seed, mask_opponent=mask_opponent, **env_kw)
    rows = []
    for _ in range(episodes):
        obs = env.reset()
        done = False
        while not done:
            logits, acts = forward(net, obs, record=True)
            rows.append(np.concatenate([a[0] for a in acts]))
            action = int(np.argmax(logits))
            obs, _, done, _ = env.step(action)
    data = np.vstack(rows) if rows else np.zeros((0, sum(net.layer_sizes)))
    meta = {"env": kind, "episodes": episodes, "seed": seed,
            "mask_opponent": mask_opponent}
    return ActivationTrace(data=data, layer_sizes=list(net.layer_sizes), meta=meta)


def save_trace(trace: ActivationTrace, basepath: str) -> None:
    np.save(basepath + ".npy", trace.data)
    with open(basepath + ".json", "w") as f:
        json.dump({"layer_sizes": trace.layer_sizes, "meta": trace.meta},
                  f, indent=1, sort_keys=True)
        f.write("\n")


def load_trace(basepath: str) -> ActivationTrace:
    data = np.load(basepath + ".npy")
    with open(basepath + ".json") as f:
        head = json.load(f)
    return ActivationTrace(data=data, layer_sizes=head["layer_sizes"],
                           meta=head["meta"])


CHECKPOINT_FORMAT = "modrl-checkpoint-v1"


def checkpoint_dict(net: SpatialMLP, meta: dict | None = None) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "layer_sizes": list(net.layer_sizes),
        "activation": net.activation,
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
        "x_coords": [x.tolist() for x in net.x_coords],
        "weight_masks": [m.astype(int).tolist() for m in net.weight_masks],
        "neuron_masks": [m.astype(int).tolist() for m in net.neuron_masks],
        "meta": dict(meta or {}),
    }


def save_checkpoint(net: SpatialMLP, path: str, meta: dict | None = None) -> None:
    """Write a self-describing JSON checkpoint (bit-exact at float64)."""
    with open(path, "w") as f:
        json.dump(checkpoint_dict(net, meta), f, sort_keys=True)
        f.write("\n")


def network_from_dict(d: dict) -> tuple[SpatialMLP, dict]:
    if d.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not a {CHECKPOINT_FORMAT} file")
    net = SpatialMLP(
        layer_sizes=list(d["layer_sizes"]),
        weights=[np.asarray(w, dtype=np.float64) for w in d["weights"]],
        biases=[np.asarray(b, dtype=np.float64) for b in d["biases"]],
        x_coords=[np.asarray(x, dtype=np.float64) for x in d["x_coords"]],
        weight_masks=[np.asarray(m, dtype=bool) for m in d["weight_masks"]],
        neuron_masks=[np.asarray(m, dtype=bool) for m in d["neuron_masks"]],
        activation=d["activation"],
    )
    return net, d.get("meta", {})


def load_checkpoint(path: str) -> tuple[SpatialMLP, dict]:
    with open(path) as f:
        return network_from_dict(json.load(f))
