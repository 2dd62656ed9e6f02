"""The navigation proposal regressor: a small fully connected network.

Hidden layers use tanh, the output layer sigmoid, so predictions live in
(0, 1) and match the normalized label encoding. Training minimizes the
squared distance between predicted and target (rotation, translation) pairs
with mini-batch Adam. Everything is plain numpy in double precision and
fully deterministic per seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyDatasetError, NetworkError
from .geometry import PoseGrid, Proposal
from .labels import Dataset, denormalize

MODEL_SCHEMA_VERSION = 1

DEFAULT_HIDDEN = (64, 64)
DEFAULT_EPOCHS = 200
DEFAULT_BATCH_SIZE = 64
DEFAULT_LR = 1e-3
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8


def _sigmoid(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


# ---------------------------------------------------------------------------
# Generic layer stack, shared by the regressor and the classification policy.

def init_layers(layer_sizes: list[int], seed: int) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    if len(layer_sizes) < 2:
        raise NetworkError(f"need at least input and output sizes, got {layer_sizes}")
    if any(s < 1 for s in layer_sizes):
        raise NetworkError(f"layer sizes must be >= 1, got {layer_sizes}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def forward_layers(weights: list[np.ndarray], biases: list[np.ndarray],
                   x: np.ndarray, output: str) -> list[np.ndarray]:
    """Activations per layer for a batch (B, D); output head is 'sigmoid' or
    'linear' (logits). Returns [input, hidden..., output]."""
    acts = [x]
    for w, b in zip(weights[:-1], biases[:-1]):
        acts.append(np.tanh(acts[-1] @ w + b))
    z = acts[-1] @ weights[-1] + biases[-1]
    acts.append(_sigmoid(z) if output == "sigmoid" else z)
    return acts


def backward_layers(weights: list[np.ndarray], acts: list[np.ndarray],
                    delta_out: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Backpropagate a gradient at the output pre-/post-activation boundary.

    `delta_out` must already include the output activation derivative (for
    sigmoid + squared error: 2 (a - t) a (1 - a); for softmax + cross-entropy:
    probs - onehot). Returns per-layer (weight_grads, bias_grads).
    """
    n_layers = len(weights)
    w_grads: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    b_grads: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    delta = delta_out
    for l in range(n_layers - 1, -1, -1):
        w_grads[l] = acts[l].T @ delta
        b_grads[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ weights[l].T) * (1.0 - acts[l] * acts[l])
    return w_grads, b_grads


# ---------------------------------------------------------------------------
# The navigation regressor proper.

@dataclass
class NavNet:
    """Fully connected regressor; tanh hidden layers, sigmoid 2-unit output."""

    layer_sizes: list[int]
    weights: list[np.ndarray] = field(repr=False)
    biases: list[np.ndarray] = field(repr=False)

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "NavNet":
        return NavNet(list(self.layer_sizes),
                      [w.copy() for w in self.weights],
                      [b.copy() for b in self.biases])


def init_net(layer_sizes: list[int], seed: int = 0) -> NavNet:
    """Seeded network with the spec'd 2-unit proposal output."""
    if len(layer_sizes) < 2:
        raise NetworkError(f"need at least input and output sizes, got {layer_sizes}")
    if layer_sizes[-1] != 2:
        raise NetworkError(f"output size must be 2, got {layer_sizes[-1]}")
    weights, biases = init_layers(list(layer_sizes), seed)
    return NavNet(layer_sizes=list(layer_sizes), weights=weights, biases=biases)


def forward(net: NavNet, obs: np.ndarray) -> np.ndarray:
    """Normalized proposal pair in (0, 1) for a single observation."""
    x = np.asarray(obs, dtype=float)
    if x.shape != (net.layer_sizes[0],):
        raise NetworkError(f"observation shape {x.shape} != ({net.layer_sizes[0]},)")
    acts = forward_layers(net.weights, net.biases, x[None, :], "sigmoid")
    return acts[-1][0]


def loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Squared Euclidean distance between predicted and target pairs."""
    diff = np.asarray(pred, dtype=float) - np.asarray(target, dtype=float)
    return float(diff @ diff)


def backward(net: NavNet, obs: np.ndarray,
             target: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Analytic gradients of loss(forward(net, obs), target) w.r.t. all
    parameters, as per-layer (weight_grads, bias_grads)."""
    x = np.asarray(obs, dtype=float)[None, :]
    t = np.asarray(target, dtype=float)[None, :]
    acts = forward_layers(net.weights, net.biases, x, "sigmoid")
    out = acts[-1]
    delta = 2.0 * (out - t) * out * (1.0 - out)
    return backward_layers(net.weights, acts, delta)


@dataclass
class AdamState:
    """Adam moment accumulators, one pair per parameter tensor."""

    lr: float = DEFAULT_LR
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    epsilon: float = ADAM_EPSILON
    step: int = 0
    m_w: list[np.ndarray] = field(default_factory=list, repr=False)
    v_w: list[np.ndarray] = field(default_factory=list, repr=False)
    m_b: list[np.ndarray] = field(default_factory=list, repr=False)
    v_b: list[np.ndarray] = field(default_factory=list, repr=False)


def init_adam(weights: list[np.ndarray], biases: list[np.ndarray],
              lr: float = DEFAULT_LR) -> AdamState:
    return AdamState(
        lr=lr,
        m_w=[np.zeros_like(w) for w in weights],
        v_w=[np.zeros_like(w) for w in weights],
        m_b=[np.zeros_like(b) for b in biases],
        v_b=[np.zeros_like(b) for b in biases],
    )


def adam_update(weights: list[np.ndarray], biases: list[np.ndarray],
                w_grads: list[np.ndarray], b_grads: list[np.ndarray],
                state: AdamState) -> None:
    """One bias-corrected Adam step, applied in place."""
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for params, grads, ms, vs in ((weights, w_grads, state.m_w, state.v_w),
                                  (biases, b_grads, state.m_b, state.v_b)):
        for p, g, m, v in zip(params, grads, ms, vs):
            m *= state.beta1
            m += (1.0 - state.beta1) * g
            v *= state.beta2
            v += (1.0 - state.beta2) * (g * g)
            p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.epsilon)


def adam_step(net: NavNet, grads: tuple[list[np.ndarray], list[np.ndarray]],
              state: AdamState) -> tuple[NavNet, AdamState]:
    """Apply one Adam step to a NavNet (in place; returned for chaining)."""
    w_grads, b_grads = grads
    adam_update(net.weights, net.biases, w_grads, b_grads, state)
    return net, state


@dataclass
class TrainReport:
    """Per-epoch mean training losses plus a final full-pass evaluation."""

    epoch_losses: list[float]
    final_val_loss: float
    epochs_run: int
    seed: int


def _dataset_arrays(dataset: Dataset, include_unreachable: bool) -> tuple[np.ndarray, np.ndarray]:
    records = dataset.records if include_unreachable else \
        [r for r in dataset.records if r.label.reachable]
    if not records:
        raise EmptyDatasetError("no training records (dataset empty or all filtered)")
    x = np.stack([r.observation for r in records])
    y = np.array([r.label_norm for r in records])
    return x, y


def train(net: NavNet, dataset: Dataset, epochs: int = DEFAULT_EPOCHS,
          batch_size: int = DEFAULT_BATCH_SIZE, lr: float = DEFAULT_LR,
          seed: int = 0, include_unreachable: bool = True) -> tuple[NavNet, TrainReport]:
    """Shuffled mini-batch Adam on the normalized labels.

    Batch loss is the mean per-sample squared distance, so the learning rate
    stays meaningful across batch sizes. Fully deterministic given the seed.
    """
    x, y = _dataset_arrays(dataset, include_unreachable)
    n = x.shape[0]
    if x.shape[1] != net.layer_sizes[0]:
        raise NetworkError(
            f"dataset obs_dim {x.shape[1]} != net input size {net.layer_sizes[0]}")
    rng = np.random.default_rng(seed)
    state = init_adam(net.weights, net.biases, lr=lr)
    epoch_losses = []
    for _ in range(epochs):
        perm = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, batch_size):
            sel = perm[lo:lo + batch_size]
            xb, yb = x[sel], y[sel]
            acts = forward_layers(net.weights, net.biases, xb, "sigmoid")
            out = acts[-1]
            diff = out - yb
            total += float((diff * diff).sum())
            delta = (2.0 / xb.shape[0]) * diff * out * (1.0 - out)
            grads = backward_layers(net.weights, acts, delta)
            adam_update(net.weights, net.biases, grads[0], grads[1], state)
        epoch_losses.append(total / n)
    final_out = forward_layers(net.weights, net.biases, x, "sigmoid")[-1]
    final_diff = final_out - y
    final_val_loss = float((final_diff * final_diff).sum()) / n
    return net, TrainReport(epoch_losses=epoch_losses, final_val_loss=final_val_loss,
                            epochs_run=epochs, seed=seed)


def batch_loss(net: NavNet, dataset: Dataset, include_unreachable: bool = True) -> float:
    """Mean per-sample squared error over a dataset."""
    x, y = _dataset_arrays(dataset, include_unreachable)
    out = forward_layers(net.weights, net.biases, x, "sigmoid")[-1]
    diff = out - y
    return float((diff * diff).sum()) / x.shape[0]


def predict_proposal(net: NavNet, obs: np.ndarray, grid: PoseGrid) -> Proposal:
    """Forward pass denormalized into (dtheta in (-pi, pi), dr in (-R, R))."""
    u, v = forward(net, obs)
    dtheta, dr = denormalize((float(u), float(v)), grid)
    return Proposal(dtheta=dtheta, dr=dr)


def save_model(net: NavNet, path, grid: PoseGrid, extra: dict | None = None) -> None:
    """Write the regressor as JSON; floats round-trip bit-exactly."""
    payload = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "kind": "regressor",
        "layer_sizes": list(net.layer_sizes),
        "hidden_activation": "tanh",
        "output_activation": "sigmoid",
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
        "normalization": {
            "dtheta_range": [-math.pi, math.pi],
            "dr_range": [-grid.radial_span, grid.radial_span],
        },
    }
    if extra:
        payload.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_model(path) -> tuple[NavNet, dict]:
    """Read a regressor model file; returns (net, normalization ranges)."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("kind") != "regressor":
        raise NetworkError(f"{path}: not a regressor model file")
    if payload.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise NetworkError(f"{path}: unsupported schema_version")
    net = NavNet(
        layer_sizes=list(payload["layer_sizes"]),
        weights=[np.array(w, dtype=float) for w in payload["weights"]],
        biases=[np.array(b, dtype=float) for b in payload["biases"]],
    )
    return net, payload["normalization"]
