"""Local party training: softmax regression and a one-hidden-layer MLP,
trained with plain SGD and epoch-wise validation checkpointing.

The returned model is the parameter snapshot with the highest validation
accuracy seen after any epoch (earliest epoch wins ties), and that accuracy
is the model's score. Training is deterministic for a fixed config seed;
each party trains as an independent single-threaded job.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, PartitionPlan
from .errors import InvalidInputError, TrainingError

ARCHITECTURES = ("softmax", "mlp")


@dataclass(frozen=True)
class LayerParams:
    name: str
    shape: tuple[int, ...]
    values: np.ndarray  # flat float64, length = prod(shape)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).ravel()
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        if int(np.prod(self.shape)) != values.size:
            raise InvalidInputError(
                f"layer {self.name!r}: shape {self.shape} does not match "
                f"{values.size} values"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidInputError(f"layer {self.name!r} has non-finite values")

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.shape)


@dataclass(frozen=True)
class ModelParams:
    """Ordered named layers of one classifier.

    The final dense classifier is always the layer pair ``out`` of shape
    (hidden-or-input, C) and ``out_bias`` of shape (C,).
    """

    arch: str
    input_dim: int
    n_classes: int
    layers: tuple[LayerParams, ...]

    def __post_init__(self):
        if self.arch not in ARCHITECTURES:
            raise InvalidInputError(f"unknown architecture: {self.arch!r}")
        names = [layer.name for layer in self.layers]
        if "out" not in names or "out_bias" not in names:
            raise InvalidInputError("model must end in an 'out' / 'out_bias' pair")
        out = self.layer("out")
        if out.shape[-1] != self.n_classes:
            raise InvalidInputError("'out' layer width must equal the class count")

    def layer(self, name: str) -> np.ndarray:
        for layer in self.layers:
            if layer.name == name:
                return layer.as_array()
        raise InvalidInputError(f"no layer named {name!r}")

    def logical_layers(self) -> list[tuple[str, list[str]]]:
        """Weight/bias pairs grouped under the weight's name, in order."""
        groups: list[tuple[str, list[str]]] = []
        for layer in self.layers:
            if layer.name.endswith("_bias") and groups:
                groups[-1][1].append(layer.name)
            else:
                groups.append((layer.name, [layer.name]))
        return groups

    def replace_values(self, values: dict[str, np.ndarray]) -> "ModelParams":
        layers = tuple(
            LayerParams(l.name, l.shape, values.get(l.name, l.values))
            for l in self.layers
        )
        return ModelParams(self.arch, self.input_dim, self.n_classes, layers)


@dataclass(frozen=True)
class TrainConfig:
    """SGD recipe: step-decayed learning rate and cross-entropy loss."""

    epochs: int = 100
    batch_size: int = 32
    lr_init: float = 0.1
    lr_decay: float = 0.1
    lr_decay_every: int = 40
    hidden: int = 16          # mlp only
    arch: str = "softmax"
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise InvalidInputError("epochs must be at least 1")
        if self.batch_size < 1:
            raise InvalidInputError("batch_size must be at least 1")
        if self.lr_init <= 0.0:
            raise InvalidInputError("lr_init must be positive")
        if self.arch not in ARCHITECTURES:
            raise InvalidInputError(f"unknown architecture: {self.arch!r}")

    def learning_rate(self, epoch: int) -> float:
        return self.lr_init * self.lr_decay ** (epoch // self.lr_decay_every)


@dataclass(frozen=True)
class TrainResult:
    params: ModelParams
    score: float
    val_accuracies: tuple[float, ...] = field(default=())


def init_params(cfg: TrainConfig, input_dim: int, n_classes: int,
                rng: np.random.Generator) -> ModelParams:
    """Uniform +/- 1/sqrt(fan_in) initialization for weights and biases."""

    def layer(name: str, fan_in: int, shape: tuple[int, ...]) -> LayerParams:
        bound = 1.0 / np.sqrt(fan_in)
        return LayerParams(name, shape, rng.uniform(-bound, bound, int(np.prod(shape))))

    if cfg.arch == "softmax":
        layers = (
            layer("out", input_dim, (input_dim, n_classes)),
            layer("out_bias", input_dim, (n_classes,)),
        )
    else:
        layers = (
            layer("hidden", input_dim, (input_dim, cfg.hidden)),
            layer("hidden_bias", input_dim, (cfg.hidden,)),
            layer("out", cfg.hidden, (cfg.hidden, n_classes)),
            layer("out_bias", cfg.hidden, (n_classes,)),
        )
    return ModelParams(cfg.arch, input_dim, n_classes, layers)


def _forward(model: ModelParams, X: np.ndarray):
    """Returns (logits, hidden activations or None)."""
    if model.arch == "softmax":
        return X @ model.layer("out") + model.layer("out_bias"), None
    hidden = np.tanh(X @ model.layer("hidden") + model.layer("hidden_bias"))
    return hidden @ model.layer("out") + model.layer("out_bias"), hidden


def loss_and_grads(model: ModelParams, X: np.ndarray, y: np.ndarray):
    """Mean cross-entropy over the batch and flat gradients per layer."""
    B = X.shape[0]
    logits, hidden = _forward(model, X)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_norm - shifted[np.arange(B), y]))

    probs = np.exp(shifted - log_norm[:, None])
    delta = probs
    delta[np.arange(B), y] -= 1.0
    delta /= B

    grads: dict[str, np.ndarray] = {}
    if model.arch == "softmax":
        grads["out"] = (X.T @ delta).ravel()
        grads["out_bias"] = delta.sum(axis=0)
    else:
        grads["out"] = (hidden.T @ delta).ravel()
        grads["out_bias"] = delta.sum(axis=0)
        back = (delta @ model.layer("out").T) * (1.0 - hidden * hidden)
        grads["hidden"] = (X.T @ back).ravel()
        grads["hidden_bias"] = back.sum(axis=0)
    return loss, grads


def sgd_step(model: ModelParams, X: np.ndarray, y: np.ndarray,
             lr: float) -> tuple[ModelParams, float]:
    loss, grads = loss_and_grads(model, X, y)
    updated = {
        layer.name: layer.values - lr * grads[layer.name]
        for layer in model.layers
    }
    return model.replace_values(updated), loss


def predict(model: ModelParams, X) -> np.ndarray:
    """Per-row argmax of the class logits; ties go to the lower class."""
    A = np.asarray(X, dtype=np.float64)
    if A.ndim != 2 or A.shape[1] != model.input_dim:
        raise InvalidInputError(
            f"expected {model.input_dim} feature columns, got shape {A.shape}"
        )
    logits, _ = _forward(model, A)
    return np.argmax(logits, axis=1)


def accuracy(model: ModelParams, ds: Dataset) -> float:
    if ds.n == 0:
        raise InvalidInputError("dataset view is empty")
    return float(np.mean(predict(model, ds.X) == ds.y))


def train_local(train: Dataset, val: Dataset, cfg: TrainConfig) -> TrainResult:
    """SGD with shuffled mini-batches and per-epoch validation checkpoints.

    Returns the snapshot with the highest validation accuracy (earliest
    epoch on ties) along with that accuracy and the full per-epoch history.
    """
    if train.n == 0:
        raise InvalidInputError("training split is empty")
    if val.n == 0:
        raise InvalidInputError("validation split is empty")

    rng = np.random.default_rng(cfg.seed)
    model = init_params(cfg, train.d, train.C, rng)

    best_model = model
    best_score = -1.0
    history: list[float] = []
    for epoch in range(cfg.epochs):
        lr = cfg.learning_rate(epoch)
        order = rng.permutation(train.n)
        for start in range(0, train.n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            try:
                model, loss = sgd_step(model, train.X[batch], train.y[batch], lr)
            except InvalidInputError as exc:  # overflowed parameter update
                raise TrainingError(f"diverged at epoch {epoch + 1}: {exc}") from exc
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch + 1}")
        score = accuracy(model, val)
        history.append(score)
        if score > best_score:
            best_score = score
            best_model = model
    return TrainResult(best_model, best_score, tuple(history))


def train_oracle(plan: PartitionPlan, ds: Dataset, cfg: TrainConfig) -> TrainResult:
    """One model trained on the union of all parties' train splits,
    validated on the union of their validation splits."""
    train_idx = [i for part in plan.train for i in part]
    val_idx = [i for part in plan.val for i in part]
    return train_local(ds.subset(train_idx), ds.subset(val_idx), cfg)
