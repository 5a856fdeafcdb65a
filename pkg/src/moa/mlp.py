"""Four-layer feed-forward classifier trained from scratch.

Three hidden ReLU layers plus a 2-way output layer, weighted cross-entropy
with analytically exact gradients, and Adam with coupled L2 weight decay.
Everything is plain float64 numpy and deterministic for a fixed seed; the
gradient path is validated against central finite differences in the tests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from moa.errors import DimensionMismatchError, TrainingError

DEFAULT_HIDDEN_DIMS = (512, 256, 64)
N_CLASSES = 2

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# p >= 0.5 resolves to the mutant class; ties go to mutant by the >= rule.
PREDICTION_THRESHOLD = 0.5


@dataclass
class MlpModel:
    """Weights/biases for the four affine layers, plus the init seed."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    seed: int
    activation: str = "relu"

    def __post_init__(self):
        if len(self.weights) != 4 or len(self.biases) != 4:
            raise ValueError("model must have exactly 4 weight layers")
        for w, b in zip(self.weights, self.biases):
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError("model parameters must be finite")
        if self.weights[-1].shape[1] != N_CLASSES:
            raise ValueError(f"output layer must have {N_CLASSES} units")

    @property
    def layer_dims(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    def parameter_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "MlpModel":
        return MlpModel(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            seed=self.seed,
            activation=self.activation,
        )


@dataclass
class TrainConfig:
    """Optimization hyperparameters; defaults follow the evaluation protocol."""

    learning_rate: float = 1e-4
    weight_decay: float = 1e-5
    batch_size: int = 32
    epochs: int = 100
    class_weights: str | tuple[float, float] = "auto_inverse_frequency"
    seed: int = 0
    decoupled_weight_decay: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


def init_model(
    input_dim: int,
    hidden_dims: tuple[int, int, int] = DEFAULT_HIDDEN_DIMS,
    seed: int = 0,
) -> MlpModel:
    """He-initialized weights from a seeded generator, zero biases."""
    if input_dim < 1:
        raise ValueError("input_dim must be >= 1")
    hidden_dims = tuple(hidden_dims)
    if len(hidden_dims) != 3:
        raise ValueError("hidden_dims must have exactly 3 entries")
    if any(d < 1 for d in hidden_dims):
        raise ValueError("hidden dims must be positive")
    dims = (input_dim,) + hidden_dims + (N_CLASSES,)
    rng = np.random.default_rng(seed)
    weights = [
        rng.normal(0.0, np.sqrt(2.0 / dims[i]), size=(dims[i], dims[i + 1]))
        for i in range(4)
    ]
    biases = [np.zeros(dims[i + 1]) for i in range(4)]
    return MlpModel(weights=weights, biases=biases, seed=seed)


def _check_input(model: MlpModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != model.input_dim:
        raise DimensionMismatchError(
            f"input dim {x.shape[1]} != model input dim {model.input_dim}"
        )
    return x


def forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Logits for a batch: affine -> relu three times, then affine."""
    x = _check_input(model, x)
    h = x
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        h = np.maximum(h @ w + b, 0.0)
    return h @ model.weights[-1] + model.biases[-1]


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=-1, keepdims=True)


def weighted_ce_loss(
    logits: np.ndarray, labels: np.ndarray, class_weights: np.ndarray
) -> tuple[float, np.ndarray]:
    """Weighted-mean cross-entropy and its exact gradient w.r.t. logits.

    loss = sum_i w[y_i] * (-log softmax(logits_i)[y_i]) / sum_i w[y_i]
    """
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise TrainingError("non-finite logits")
    labels = np.asarray(labels, dtype=np.int64)
    class_weights = np.asarray(class_weights, dtype=np.float64)
    if np.any(class_weights <= 0):
        raise ValueError("class weights must be positive")
    if logits.ndim != 2 or logits.shape[0] != labels.shape[0]:
        raise ValueError("logits must be (n, 2) aligned with labels")
    if np.any((labels < 0) | (labels >= N_CLASSES)):
        raise ValueError("labels must be in {0, 1}")

    n = logits.shape[0]
    probs = softmax(logits)
    sample_weights = class_weights[labels]
    total_weight = sample_weights.sum()
    log_probs = logits - logits.max(axis=1, keepdims=True)
    log_probs = log_probs - np.log(np.exp(log_probs).sum(axis=1, keepdims=True))
    loss = float((sample_weights * -log_probs[np.arange(n), labels]).sum() / total_weight)

    grad = probs.copy()
    grad[np.arange(n), labels] -= 1.0
    grad *= (sample_weights / total_weight)[:, None]
    return loss, grad


def inverse_frequency_weights(labels: np.ndarray, n_classes: int = N_CLASSES) -> np.ndarray:
    """w_c = N / (K * N_c); requires every class to be present."""
    labels = np.asarray(labels, dtype=np.int64)
    counts = np.bincount(labels, minlength=n_classes)
    if np.any(counts == 0):
        raise TrainingError(
            "auto class weights need at least one sample per class "
            f"(counts={counts.tolist()})"
        )
    return labels.size / (n_classes * counts.astype(np.float64))


def _backprop(
    model: MlpModel, x: np.ndarray, labels: np.ndarray, class_weights: np.ndarray
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Loss plus gradients for every weight matrix and bias vector."""
    x = _check_input(model, x)
    activations = [x]
    h = x
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        h = np.maximum(h @ w + b, 0.0)
        activations.append(h)
    logits = h @ model.weights[-1] + model.biases[-1]

    loss, delta = weighted_ce_loss(logits, labels, class_weights)
    weight_grads: list[np.ndarray] = [None] * 4
    bias_grads: list[np.ndarray] = [None] * 4
    for layer in range(3, -1, -1):
        weight_grads[layer] = activations[layer].T @ delta
        bias_grads[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ model.weights[layer].T) * (activations[layer] > 0)
    return loss, weight_grads, bias_grads


@dataclass
class AdamState:
    """First/second moment accumulators plus the shared step counter."""

    m_weights: list[np.ndarray]
    v_weights: list[np.ndarray]
    m_biases: list[np.ndarray]
    v_biases: list[np.ndarray]
    step: int = 0

    @classmethod
    def for_model(cls, model: MlpModel) -> "AdamState":
        return cls(
            m_weights=[np.zeros_like(w) for w in model.weights],
            v_weights=[np.zeros_like(w) for w in model.weights],
            m_biases=[np.zeros_like(b) for b in model.biases],
            v_biases=[np.zeros_like(b) for b in model.biases],
        )


def _adam_update(
    param: np.ndarray, grad: np.ndarray, m: np.ndarray, v: np.ndarray, lr: float, t: int
) -> None:
    """param -= lr * m_hat / (sqrt(v_hat) + eps), with moments updated in place."""
    m *= ADAM_BETA1
    m += (1 - ADAM_BETA1) * grad
    v *= ADAM_BETA2
    v += (1 - ADAM_BETA2) * (grad * grad)
    m_hat = m / (1 - ADAM_BETA1**t)
    v_hat = v / (1 - ADAM_BETA2**t)
    np.sqrt(v_hat, out=v_hat)
    v_hat += ADAM_EPS
    m_hat /= v_hat
    m_hat *= lr
    param -= m_hat


def adam_step(
    model: MlpModel,
    weight_grads: list[np.ndarray],
    bias_grads: list[np.ndarray],
    state: AdamState,
    config: TrainConfig,
) -> None:
    """One in-place Adam update with bias-corrected moments.

    Weight decay is coupled (added to the gradient) by default; the
    decoupled variant subtracts lr*wd*param directly instead. Biases are
    never decayed. The gradient buffers are consumed (mutated) here.
    """
    state.step += 1
    t = state.step
    lr = config.learning_rate
    for i in range(4):
        grad = weight_grads[i]
        if config.weight_decay:
            if config.decoupled_weight_decay:
                model.weights[i] -= lr * config.weight_decay * model.weights[i]
            else:
                grad += config.weight_decay * model.weights[i]
        _adam_update(model.weights[i], grad, state.m_weights[i], state.v_weights[i], lr, t)
        _adam_update(model.biases[i], bias_grads[i], state.m_biases[i], state.v_biases[i], lr, t)


def resolve_class_weights(config: TrainConfig, labels: np.ndarray) -> np.ndarray:
    if config.class_weights == "auto_inverse_frequency":
        return inverse_frequency_weights(labels)
    weights = np.asarray(config.class_weights, dtype=np.float64)
    if weights.shape != (N_CLASSES,) or np.any(weights <= 0):
        raise ValueError("explicit class_weights must be 2 positive values")
    return weights


def train(
    model: MlpModel, x: np.ndarray, y: np.ndarray, config: TrainConfig
) -> tuple[MlpModel, list[float]]:
    """Mini-batch training with a per-epoch seeded shuffle.

    Returns a trained copy (the input model is untouched) and the per-epoch
    mean batch loss. Identical seed and data give a bit-identical model.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValueError("x must be (n, d) aligned with y")
    if x.shape[0] == 0:
        raise TrainingError("cannot train on an empty dataset")
    class_weights = resolve_class_weights(config, y)

    model = model.copy()
    state = AdamState.for_model(model)
    rng = np.random.default_rng(config.seed)
    n = x.shape[0]
    curve: list[float] = []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, weight_grads, bias_grads = _backprop(model, x[idx], y[idx], class_weights)
            adam_step(model, weight_grads, bias_grads, state, config)
            epoch_losses.append(loss)
        curve.append(float(np.mean(epoch_losses)))
    return model, curve


def predict_proba_batch(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Probability of the mutant class (index 1) for each row."""
    return softmax(forward(model, x))[:, 1]


def predict_proba(model: MlpModel, vector: np.ndarray) -> float:
    return float(predict_proba_batch(model, np.asarray(vector, dtype=np.float64)[None, :])[0])


def predict_label(model: MlpModel, vector: np.ndarray) -> int:
    """1 (mutant) when p >= 0.5, else 0 (wildtype)."""
    return int(predict_proba(model, vector) >= PREDICTION_THRESHOLD)


def save_model(path, model: MlpModel) -> None:
    """Checkpoint: architecture descriptor plus float64 parameters."""
    descriptor = json.dumps(
        {"layer_dims": model.layer_dims, "seed": model.seed, "activation": model.activation}
    )
    arrays = {f"w{i}": model.weights[i] for i in range(4)}
    arrays.update({f"b{i}": model.biases[i] for i in range(4)})
    with Path(path).open("wb") as fh:
        np.savez(fh, descriptor=np.array(descriptor), **arrays)


def load_model(path) -> MlpModel:
    with np.load(Path(path), allow_pickle=False) as data:
        descriptor = json.loads(str(data["descriptor"]))
        weights = [data[f"w{i}"].astype(np.float64) for i in range(4)]
        biases = [data[f"b{i}"].astype(np.float64) for i in range(4)]
    return MlpModel(
        weights=weights,
        biases=biases,
        seed=int(descriptor["seed"]),
        activation=descriptor.get("activation", "relu"),
    )
