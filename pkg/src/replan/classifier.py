"""Two-member MLP ensemble with an AND acceptance rule, trained by seeded SGD.

The decision rule grants approval only when both members score above the
threshold. Training is fully deterministic given (config seed, member index):
initialization, shuffling and batching all derive from one seeded generator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .schema import Dataset, FeatureSet, UserProfile, encode, encode_batch


class TrainingError(RuntimeError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.25
    epochs: int = 40
    batch_size: int = 32
    seed: int = 0
    hidden_dims: tuple[tuple[int, ...], tuple[int, ...]] = ((16, 8), (12, 12))

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.epochs <= 0 or self.batch_size <= 0:
            raise ValueError("learning_rate, epochs and batch_size must be positive")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _bce(logits: np.ndarray, y: np.ndarray) -> float:
    # mean of softplus(z) - y*z, stable for large |z|
    return float(np.mean(np.logaddexp(0.0, logits) - y * logits))


class MlpModel:
    """Fully-connected net: ReLU hidden layers, logistic scalar output."""

    def __init__(self, layer_dims: Sequence[int], weights: Sequence[np.ndarray],
                 biases: Sequence[np.ndarray]):
        dims = tuple(int(d) for d in layer_dims)
        if len(dims) < 2 or any(d <= 0 for d in dims):
            raise CheckpointError(f"bad layer dims {dims}")
        if dims[-1] != 1:
            raise CheckpointError("output dimension must be 1")
        if len(weights) != len(dims) - 1 or len(biases) != len(dims) - 1:
            raise CheckpointError("parameter count does not match layer dims")
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (dims[i], dims[i + 1]) or b.shape != (dims[i + 1],):
                raise CheckpointError(
                    f"layer {i}: shapes {w.shape}/{b.shape} break the chain "
                    f"{dims[i]}->{dims[i + 1]}"
                )
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise CheckpointError(f"layer {i}: non-finite parameters")
        self.layer_dims = dims
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        for arr in self.weights + self.biases:
            arr.setflags(write=False)

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    def logits(self, x: np.ndarray) -> np.ndarray:
        h = np.atleast_2d(x)
        if h.shape[1] != self.input_dim:
            raise ValueError(
                f"input dim {h.shape[1]} does not match model dim {self.input_dim}"
            )
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
        return (h @ self.weights[-1] + self.biases[-1])[:, 0]


def forward(model: MlpModel, v: np.ndarray) -> float:
    """Probability for a single encoded input."""
    return float(_sigmoid(model.logits(np.asarray(v, dtype=np.float64)))[0])


def forward_batch(model: MlpModel, x: np.ndarray) -> np.ndarray:
    return _sigmoid(model.logits(x))


def gradient(
    model: MlpModel, x: np.ndarray, y: np.ndarray
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Exact gradient of the mean binary cross-entropy over the batch."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    activations = [x]
    h = x
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        h = np.maximum(h @ w + b, 0.0)
        activations.append(h)
    logits = (h @ model.weights[-1] + model.biases[-1])[:, 0]

    n = x.shape[0]
    delta = ((_sigmoid(logits) - y) / n)[:, None]
    grads_w: list[np.ndarray] = [None] * len(model.weights)  # type: ignore[list-item]
    grads_b: list[np.ndarray] = [None] * len(model.biases)  # type: ignore[list-item]
    for layer in range(len(model.weights) - 1, -1, -1):
        grads_w[layer] = activations[layer].T @ delta
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ model.weights[layer].T) * (activations[layer] > 0)
    return grads_w, grads_b


def dataset_matrix(data: Dataset) -> tuple[np.ndarray, np.ndarray]:
    x = encode_batch((p for p, _ in data.rows), data.schema)
    y = np.asarray(data.labels, dtype=np.float64)
    return x, y


def train_member(data: Dataset, cfg: TrainConfig, member_index: int) -> MlpModel:
    """Train one ensemble member by minibatch SGD on mean BCE."""
    if member_index not in (0, 1):
        raise ValueError("member_index must be 0 or 1")
    if len(data) == 0:
        raise TrainingError("empty dataset")
    labels = set(data.labels)
    if labels != {0, 1}:
        raise TrainingError(f"both labels required, got {sorted(labels)}")

    x, y = dataset_matrix(data)
    rng = np.random.default_rng((cfg.seed, member_index))
    dims = (x.shape[1],) + tuple(cfg.hidden_dims[member_index]) + (1,)
    weights, biases = [], []
    for nin, nout in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (nin + nout))
        weights.append(rng.uniform(-limit, limit, size=(nin, nout)))
        biases.append(np.zeros(nout))

    model = MlpModel(dims, weights, biases)
    n = x.shape[0]
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            gw, gb = gradient(model, x[batch], y[batch])
            new_w = [w - cfg.learning_rate * g for w, g in zip(model.weights, gw)]
            new_b = [b - cfg.learning_rate * g for b, g in zip(model.biases, gb)]
            model = MlpModel(dims, new_w, new_b)
        loss = _bce(model.logits(x), y)
        if not np.isfinite(loss):
            raise TrainingError(f"training diverged at epoch {epoch}: loss={loss}")
    return model


class EnsembleClassifier:
    """AND rule over exactly two members sharing one input encoding."""

    def __init__(self, members: Sequence[MlpModel], threshold: float = 0.5):
        members = tuple(members)
        if len(members) != 2:
            raise CheckpointError("ensemble requires exactly 2 members")
        if members[0].input_dim != members[1].input_dim:
            raise CheckpointError("members disagree on input dimension")
        if not (0.0 < threshold < 1.0):
            raise CheckpointError("threshold must lie in (0, 1)")
        self.members = members
        self.threshold = float(threshold)

    @property
    def input_dim(self) -> int:
        return self.members[0].input_dim

    def member_probs(self, v: np.ndarray) -> tuple[float, float]:
        return forward(self.members[0], v), forward(self.members[1], v)

    def predict_encoded(self, v: np.ndarray) -> int:
        p0, p1 = self.member_probs(v)
        return int(p0 > self.threshold and p1 > self.threshold)

    def predict_batch(self, x: np.ndarray) -> np.ndarray:
        p0 = forward_batch(self.members[0], x)
        p1 = forward_batch(self.members[1], x)
        return ((p0 > self.threshold) & (p1 > self.threshold)).astype(np.int64)


def predict(h: EnsembleClassifier, x: UserProfile, schema: FeatureSet) -> int:
    """1 iff every member scores above the threshold for this profile."""
    return h.predict_encoded(encode(x, schema))


def train_ensemble(data: Dataset, cfg: TrainConfig) -> EnsembleClassifier:
    return EnsembleClassifier(
        members=(train_member(data, cfg, 0), train_member(data, cfg, 1))
    )


# -- checkpoint file ---------------------------------------------------------

_CKPT_FORMAT = "replan-checkpoint-1"


def checkpoint_text(ensemble: EnsembleClassifier) -> str:
    doc = {
        "format": _CKPT_FORMAT,
        "threshold": ensemble.threshold,
        "members": [
            {
                "layer_dims": list(m.layer_dims),
                "weights": [w.tolist() for w in m.weights],
                "biases": [b.tolist() for b in m.biases],
            }
            for m in ensemble.members
        ],
    }
    return json.dumps(doc, sort_keys=True)


def save_checkpoint(ensemble: EnsembleClassifier, path: str | Path) -> None:
    Path(path).write_text(checkpoint_text(ensemble), encoding="utf-8")


def load_checkpoint_text(text: str) -> EnsembleClassifier:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"checkpoint is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != _CKPT_FORMAT:
        raise CheckpointError(f"unsupported checkpoint format {doc.get('format')!r}")
    members = []
    for entry in doc.get("members", []):
        dims = entry["layer_dims"]
        weights = [np.asarray(w, dtype=np.float64) for w in entry["weights"]]
        biases = [np.asarray(b, dtype=np.float64) for b in entry["biases"]]
        members.append(MlpModel(dims, weights, biases))
    return EnsembleClassifier(members, threshold=float(doc.get("threshold", 0.5)))


def load_checkpoint(path: str | Path) -> EnsembleClassifier:
    return load_checkpoint_text(Path(path).read_text(encoding="utf-8"))
