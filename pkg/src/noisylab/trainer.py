"""From-scratch multilayer perceptron with manual backpropagation, SGD with
momentum and weight decay, a step learning-rate schedule, and an epoch loop
that records the diagnostics the evaluation tooling consumes.

The network is rectifier-activated on hidden layers with identity output
(logits). Batch gradients are the mean over the batch, so the base learning
rate is independent of batch size. Weight decay applies to weights only,
never biases.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import losses, metrics
from .data_io import Dataset
from .errors import DivergenceError
from .noise import CorruptionRecord, NoiseModel, corrupt
from .numerics import RngStream, softmax_rows

_EVAL_CHUNK = 1024


@dataclass
class MlpModel:
    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray] = field(repr=False)
    biases: list[np.ndarray] = field(repr=False)

    @property
    def num_classes(self) -> int:
        return self.layer_sizes[-1]


@dataclass
class OptState:
    """Momentum velocity buffers, one per parameter tensor."""

    weight_velocity: list[np.ndarray] = field(repr=False)
    bias_velocity: list[np.ndarray] = field(repr=False)
    momentum: float = 0.9
    weight_decay: float = 1e-4


@dataclass(frozen=True)
class TrainConfig:
    loss: losses.LossSpec
    epochs: int
    batch_size: int = 128
    base_lr: float = 0.01
    lr_milestones: tuple[int, ...] = ()
    lr_factor: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    hidden_sizes: tuple[int, ...] = (256, 128)
    seed: int = 0
    noise: NoiseModel | None = None

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if any(b <= a for a, b in zip(self.lr_milestones, self.lr_milestones[1:])):
            raise ValueError("lr milestones must be strictly increasing")
        if not (0 < self.lr_factor <= 1):
            raise ValueError("lr_factor must lie in (0, 1]")


@dataclass(frozen=True)
class TrainRun:
    """Full record of one training run."""

    config: TrainConfig
    test_accuracy: tuple[float, ...]
    classwise_accuracy: np.ndarray = field(repr=False)  # (epochs, K)
    train_loss: tuple[float, ...]
    final_confusion: np.ndarray = field(repr=False)  # (K, K)
    confidence_profile: np.ndarray = field(repr=False)  # (K, K), NaN rows where empty
    realized_noise_rate: float

    @property
    def last_accuracy(self) -> float:
        return self.test_accuracy[-1] if self.test_accuracy else float("nan")

    @property
    def best_accuracy(self) -> float:
        return max(self.test_accuracy) if self.test_accuracy else float("nan")

    @property
    def final_class_spread(self) -> float:
        if not len(self.classwise_accuracy):
            return float("nan")
        last = self.classwise_accuracy[-1]
        return float(last.max() - last.min())


def init_model(layer_sizes, rng: RngStream) -> MlpModel:
    """He-normal weights (scale sqrt(2 / fan_in)), zero biases."""
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2:
        raise ValueError("need at least input and output sizes")
    if any(s < 1 for s in sizes):
        raise ValueError("layer sizes must be positive")
    gen = rng.generator()
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        scale = np.sqrt(2.0 / fan_in)
        weights.append(scale * gen.standard_normal((fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(sizes, weights, biases)


def forward(model: MlpModel, batch: np.ndarray):
    """Logits for a batch plus the activation cache backward needs.

    Returns (logits, cache) where cache holds the input of every layer
    after activation.
    """
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.layer_sizes[0]:
        raise ValueError("batch width does not match the input layer")
    inputs = [x]
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = inputs[-1] @ w + b
        if i < len(model.weights) - 1:
            z = np.maximum(z, 0.0)
        inputs.append(z)
    logits = inputs.pop()
    return logits, inputs


def backward(model: MlpModel, cache, grad_logits: np.ndarray):
    """Parameter gradients of the mean loss over the batch.

    ``grad_logits`` holds per-sample loss gradients d l_i / d z; the mean
    reduction happens here. Returns (weight_grads, bias_grads).
    """
    if cache is None or len(cache) != len(model.weights):
        raise ValueError("activation cache is missing or does not match the model")
    n = grad_logits.shape[0]
    delta = grad_logits / n
    weight_grads = [None] * len(model.weights)
    bias_grads = [None] * len(model.biases)
    for i in range(len(model.weights) - 1, -1, -1):
        a = cache[i]
        weight_grads[i] = a.T @ delta
        bias_grads[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (a > 0)
    return weight_grads, bias_grads


def init_opt_state(model: MlpModel, momentum: float, weight_decay: float) -> OptState:
    return OptState(
        weight_velocity=[np.zeros_like(w) for w in model.weights],
        bias_velocity=[np.zeros_like(b) for b in model.biases],
        momentum=momentum,
        weight_decay=weight_decay,
    )


def sgd_step(model: MlpModel, grads, opt: OptState, lr: float):
    """One SGD update with momentum and decoupled-from-bias weight decay:
    v = momentum * v + grad + decay * param; param -= lr * v. Updates the
    model and optimizer state in place and returns them."""
    weight_grads, bias_grads = grads
    for w, g, v in zip(model.weights, weight_grads, opt.weight_velocity):
        v *= opt.momentum
        v += g + opt.weight_decay * w
        w -= lr * v
    for b, g, v in zip(model.biases, bias_grads, opt.bias_velocity):
        v *= opt.momentum
        v += g
        b -= lr * v
    return model, opt


def lr_at(epoch: int, config: TrainConfig) -> float:
    """Step schedule: base_lr scaled by lr_factor per milestone reached."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    drops = sum(1 for m in config.lr_milestones if m <= epoch)
    return config.base_lr * config.lr_factor**drops


def predict_logits(model: MlpModel, features: np.ndarray) -> np.ndarray:
    """Forward pass in chunks, without caching activations."""
    outputs = []
    for start in range(0, len(features), _EVAL_CHUNK):
        logits, _ = forward(model, features[start : start + _EVAL_CHUNK])
        outputs.append(logits)
    if not outputs:
        return np.zeros((0, model.num_classes))
    return np.concatenate(outputs)


def train(train_set: Dataset, test_set: Dataset, config: TrainConfig) -> TrainRun:
    """Run the full training protocol and collect diagnostics.

    Training labels are corrupted per ``config.noise`` (the test set is
    never touched), batches are reshuffled every epoch from the run seed,
    and the clean test set is evaluated after every epoch. Raises
    DivergenceError if the loss goes non-finite.
    """
    k = train_set.num_classes
    rng = RngStream(config.seed)
    if config.noise is not None:
        if config.noise.num_classes != k:
            raise ValueError("noise model class count does not match the dataset")
        record = corrupt(train_set.labels, config.noise, rng.substream(0))
    else:
        record = CorruptionRecord(
            noisy_labels=train_set.labels.copy(),
            clean_mask=np.ones(len(train_set), dtype=bool),
            realized_rate=0.0,
        )
    transitions = (
        {"noise": config.noise.transition} if config.noise is not None else None
    )

    model = init_model(
        (train_set.features.shape[1], *config.hidden_sizes, k), rng.substream(1)
    )
    opt = init_opt_state(model, config.momentum, config.weight_decay)
    shuffler = rng.substream(2).generator()

    test_acc: list[float] = []
    class_acc: list[np.ndarray] = []
    train_loss: list[float] = []
    for epoch in range(config.epochs):
        lr = lr_at(epoch, config)
        order = shuffler.permutation(len(train_set))
        loss_sum = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            # overflow here is not a bug, it is the divergence we detect below
            with np.errstate(over="ignore", invalid="ignore"):
                logits, cache = forward(model, train_set.features[batch])
            if not np.all(np.isfinite(logits)):
                raise DivergenceError(epoch)
            values, grad_logits = losses.evaluate_batch(
                config.loss, logits, record.noisy_labels[batch], transitions
            )
            if not np.all(np.isfinite(values)):
                raise DivergenceError(epoch)
            loss_sum += float(values.sum())
            grads = backward(model, cache, grad_logits)
            sgd_step(model, grads, opt, lr)
        train_loss.append(loss_sum / len(order))
        preds = predict_logits(model, test_set.features).argmax(axis=1)
        report = metrics.classwise_accuracy(preds, test_set.labels, k)
        test_acc.append(report.overall)
        class_acc.append(report.per_class)

    final_preds = predict_logits(model, test_set.features).argmax(axis=1)
    confusion = metrics.confusion_matrix(final_preds, test_set.labels, k)
    train_probs = softmax_rows(predict_logits(model, train_set.features))
    profile = np.full((k, k), np.nan)
    for c in range(k):
        take = record.clean_mask & (train_set.labels == c)
        if take.any():
            profile[c] = train_probs[take].mean(axis=0)

    return TrainRun(
        config=config,
        test_accuracy=tuple(test_acc),
        classwise_accuracy=np.array(class_acc).reshape(len(class_acc), k),
        train_loss=tuple(train_loss),
        final_confusion=confusion,
        confidence_profile=profile,
        realized_noise_rate=record.realized_rate,
    )
