"""Navigation policies: static, random, classification-based, regression, oracle.

Every policy exposes propose(observation, pose, rng) -> Proposal. The learned
policies read only the observation; the oracle (a testing aid) reads only the
pose, snapping it to the grid and returning the stored ground-truth label.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyDatasetError, NetworkError
from .geometry import Pose, PoseGrid, Proposal
from .labels import Dataset, NavigationLabel
from .network import (
    MODEL_SCHEMA_VERSION,
    DEFAULT_BATCH_SIZE,
    DEFAULT_EPOCHS,
    DEFAULT_HIDDEN,
    DEFAULT_LR,
    adam_update,
    backward_layers,
    forward_layers,
    init_adam,
    init_layers,
)

# Direction-class bin edges: |d| <= small -> bin 0, <= large -> bin +-1,
# else bin +-2. Theta edges in radians, radial edges in meters.
THETA_BIN_EDGES = (0.05, 0.5)
R_BIN_EDGES = (0.5, 5.0)
N_CLASSES = 25


@dataclass(frozen=True)
class DirectionClass:
    """Joint sign/magnitude bin of a label: 5 theta bins x 5 radial bins."""

    theta_bin: int  # in {-2, -1, 0, +1, +2}
    r_bin: int      # in {-2, -1, 0, +1, +2}

    @property
    def index(self) -> int:
        return (self.theta_bin + 2) * 5 + (self.r_bin + 2)

    @classmethod
    def from_index(cls, index: int) -> "DirectionClass":
        return cls(theta_bin=index // 5 - 2, r_bin=index % 5 - 2)


def _bin(value: float, edges: tuple[float, float]) -> int:
    small, large = edges
    mag = abs(value)
    if mag <= small:
        return 0
    sign = 1 if value > 0 else -1
    return sign if mag <= large else 2 * sign


def quantize_label(label: NavigationLabel,
                   theta_edges: tuple[float, float] = THETA_BIN_EDGES,
                   r_edges: tuple[float, float] = R_BIN_EDGES) -> DirectionClass:
    """Map a label to its direction class by the fixed bin edges."""
    return DirectionClass(theta_bin=_bin(label.dtheta, theta_edges),
                          r_bin=_bin(label.dr, r_edges))


def _bin_midpoint(bin_value: int, edges: tuple[float, float], bound: float) -> float:
    small, large = edges
    if bin_value == 0:
        return 0.0
    mag = (small + large) / 2.0 if abs(bin_value) == 1 else (large + bound) / 2.0
    return math.copysign(mag, bin_value)


def class_centroid(direction: DirectionClass, labels: list[NavigationLabel],
                   grid: PoseGrid,
                   theta_edges: tuple[float, float] = THETA_BIN_EDGES,
                   r_edges: tuple[float, float] = R_BIN_EDGES) -> Proposal:
    """Mean (dtheta, dr) of the labels falling in a class; empty classes fall
    back to the bin midpoints."""
    members = [l for l in labels
               if quantize_label(l, theta_edges, r_edges) == direction]
    if members:
        return Proposal(dtheta=sum(l.dtheta for l in members) / len(members),
                        dr=sum(l.dr for l in members) / len(members))
    return Proposal(
        dtheta=_bin_midpoint(direction.theta_bin, theta_edges, math.pi),
        dr=_bin_midpoint(direction.r_bin, r_edges, grid.radial_span),
    )


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# Policies.

class StaticPolicy:
    """Never moves; the no-active-perception baseline."""

    name = "static"

    def propose(self, obs, pose, rng=None) -> Proposal:
        return Proposal(0.0, 0.0)


class RandomPolicy:
    """Uniform proposals over the full proposal space.

    Draws from the rng stream supplied by the caller; without one, falls back
    to an internal stream built from the construction seed.
    """

    name = "random"

    def __init__(self, grid: PoseGrid, seed: int = 0):
        self.radial_span = grid.radial_span
        self._rng = np.random.default_rng(seed)

    def propose(self, obs, pose, rng=None) -> Proposal:
        gen = rng if rng is not None else self._rng
        return Proposal(dtheta=gen.uniform(-math.pi, math.pi),
                        dr=gen.uniform(-self.radial_span, self.radial_span))


class RegressionPolicy:
    """Wraps a trained NavNet; the proposed method."""

    name = "regression"

    def __init__(self, net, grid: PoseGrid):
        from .network import NavNet  # local import keeps module load light
        if not isinstance(net, NavNet):
            raise NetworkError("policy_regression needs a NavNet")
        self.net = net
        self.grid = grid

    def propose(self, obs, pose, rng=None) -> Proposal:
        from .network import predict_proposal
        return predict_proposal(self.net, obs, self.grid)


class ClassifierPolicy:
    """25-way direction classifier; proposes the centroid of the argmax class."""

    name = "classifier"

    def __init__(self, layer_sizes: list[int], weights: list[np.ndarray],
                 biases: list[np.ndarray], centroids: list[Proposal],
                 theta_edges: tuple[float, float] = THETA_BIN_EDGES,
                 r_edges: tuple[float, float] = R_BIN_EDGES):
        if layer_sizes[-1] != N_CLASSES:
            raise NetworkError(f"classifier output size must be {N_CLASSES}")
        if len(centroids) != N_CLASSES:
            raise NetworkError(f"need {N_CLASSES} centroids, got {len(centroids)}")
        self.layer_sizes = layer_sizes
        self.weights = weights
        self.biases = biases
        self.centroids = centroids
        self.theta_edges = theta_edges
        self.r_edges = r_edges

    def logits(self, obs: np.ndarray) -> np.ndarray:
        x = np.asarray(obs, dtype=float)[None, :]
        return forward_layers(self.weights, self.biases, x, "linear")[-1][0]

    def class_probs(self, obs: np.ndarray) -> np.ndarray:
        return softmax(self.logits(obs))

    def predict_class(self, obs: np.ndarray) -> DirectionClass:
        return DirectionClass.from_index(int(np.argmax(self.logits(obs))))

    def propose(self, obs, pose, rng=None) -> Proposal:
        return self.centroids[self.predict_class(obs).index]


class OraclePolicy:
    """Testing aid: returns the stored label of the nearest grid pose."""

    name = "oracle"

    def __init__(self, dataset: Dataset):
        if not dataset.records:
            raise EmptyDatasetError("oracle needs a non-empty dataset")
        self.grid = dataset.world.grid
        self._labels: dict[tuple[int, int], NavigationLabel] = {
            (r.angle_idx, r.radius_idx): r.label for r in dataset.records
        }
        if len(self._labels) != self.grid.n_poses:
            raise EmptyDatasetError("oracle needs one record per grid point")

    def propose(self, obs, pose: Pose, rng=None) -> Proposal:
        label = self._labels[self.grid.snap(pose)]
        return Proposal(dtheta=label.dtheta, dr=label.dr)


def policy_static() -> StaticPolicy:
    return StaticPolicy()


def policy_random(grid: PoseGrid, seed: int = 0) -> RandomPolicy:
    return RandomPolicy(grid, seed)


def policy_regression(net, grid: PoseGrid) -> RegressionPolicy:
    return RegressionPolicy(net, grid)


def policy_oracle(dataset: Dataset) -> OraclePolicy:
    return OraclePolicy(dataset)


# ---------------------------------------------------------------------------
# Classifier training.

@dataclass
class ClassifierReport:
    epoch_losses: list[float]
    train_accuracy: float
    epochs_run: int
    seed: int


def train_classifier(dataset: Dataset, epochs: int = DEFAULT_EPOCHS,
                     lr: float = DEFAULT_LR, seed: int = 0,
                     hidden: tuple[int, ...] = DEFAULT_HIDDEN,
                     batch_size: int = DEFAULT_BATCH_SIZE,
                     include_unreachable: bool = True
                     ) -> tuple[ClassifierPolicy, ClassifierReport]:
    """Train the classification baseline: same layer stack as the regressor
    but a 25-way softmax head trained with cross-entropy on quantized labels."""
    records = dataset.records if include_unreachable else \
        [r for r in dataset.records if r.label.reachable]
    if not records:
        raise EmptyDatasetError("no training records (dataset empty or all filtered)")
    x = np.stack([r.observation for r in records])
    targets = np.array([quantize_label(r.label).index for r in records])
    n, obs_dim = x.shape
    layer_sizes = [obs_dim, *hidden, N_CLASSES]
    weights, biases = init_layers(layer_sizes, seed)
    state = init_adam(weights, biases, lr=lr)
    rng = np.random.default_rng(seed)
    onehot = np.eye(N_CLASSES)[targets]
    epoch_losses = []
    for _ in range(epochs):
        perm = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, batch_size):
            sel = perm[lo:lo + batch_size]
            xb, tb = x[sel], onehot[sel]
            acts = forward_layers(weights, biases, xb, "linear")
            probs = softmax(acts[-1])
            total += float(-(tb * np.log(np.maximum(probs, 1e-300))).sum())
            delta = (probs - tb) / xb.shape[0]
            w_grads, b_grads = backward_layers(weights, acts, delta)
            adam_update(weights, biases, w_grads, b_grads, state)
        epoch_losses.append(total / n)

    logits = forward_layers(weights, biases, x, "linear")[-1]
    accuracy = float((np.argmax(logits, axis=1) == targets).mean())

    all_labels = [r.label for r in records]
    grid = dataset.world.grid
    centroids = [class_centroid(DirectionClass.from_index(i), all_labels, grid)
                 for i in range(N_CLASSES)]
    policy = ClassifierPolicy(layer_sizes=layer_sizes, weights=weights,
                              biases=biases, centroids=centroids)
    report = ClassifierReport(epoch_losses=epoch_losses, train_accuracy=accuracy,
                              epochs_run=epochs, seed=seed)
    return policy, report


def save_classifier(policy: ClassifierPolicy, path, extra: dict | None = None) -> None:
    """Write the classifier (net + centroids) as JSON, bit-exact round trip."""
    payload = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "kind": "classifier",
        "layer_sizes": list(policy.layer_sizes),
        "hidden_activation": "tanh",
        "output_activation": "softmax",
        "weights": [w.tolist() for w in policy.weights],
        "biases": [b.tolist() for b in policy.biases],
        "centroids": [[c.dtheta, c.dr] for c in policy.centroids],
        "theta_bin_edges": list(policy.theta_edges),
        "r_bin_edges": list(policy.r_edges),
    }
    if extra:
        payload.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_classifier(path) -> ClassifierPolicy:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("kind") != "classifier":
        raise NetworkError(f"{path}: not a classifier model file")
    if payload.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise NetworkError(f"{path}: unsupported schema_version")
    return ClassifierPolicy(
        layer_sizes=list(payload["layer_sizes"]),
        weights=[np.array(w, dtype=float) for w in payload["weights"]],
        biases=[np.array(b, dtype=float) for b in payload["biases"]],
        centroids=[Proposal(c[0], c[1]) for c in payload["centroids"]],
        theta_edges=tuple(payload["theta_bin_edges"]),
        r_edges=tuple(payload["r_bin_edges"]),
    )
