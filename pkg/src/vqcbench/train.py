"""Readout, loss, Adam and the mini-batch training loop, plus metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ansatz import ModelConfig, model_ops, param_count, run_model
from .autodiff import LossSpec, bit_matrix, tape_adjoint
from .sim import StateVector

THRESHOLD = 0.5
CLAMP = 1e-12
BETA1, BETA2, ADAM_EPS = 0.9, 0.999, 1e-8


# --------------------------------------------------------------------------
# readout


def softmax(raw) -> np.ndarray:
    z = np.asarray(raw, dtype=float)
    e = np.exp(z - np.max(z, axis=-1, keepdims=True))
    return e / np.sum(e, axis=-1, keepdims=True)


@dataclass(frozen=True)
class ClassProbabilities:
    raw: np.ndarray
    normalized: np.ndarray


def readout_qubits(num_classes: int) -> tuple[int, ...]:
    return (0,) if num_classes == 2 else tuple(range(num_classes))


def class_scores(probs: np.ndarray, num_qubits: int, num_classes: int) -> tuple[np.ndarray, np.ndarray]:
    """Raw per-qubit P(|1>) and the normalized scores for a probability batch.

    Binary readout keeps the scalar P(|1>) on qubit 0; multi-class applies
    softmax over qubits 0..M-1.
    """
    raw = probs @ bit_matrix(num_qubits, readout_qubits(num_classes))
    if num_classes == 2:
        return raw, raw
    return raw, softmax(raw)


def labels_from_scores(raw: np.ndarray, num_classes: int) -> np.ndarray:
    """Binary: P1(q0) > 0.5. Multi-class: argmax over the raw per-qubit
    probabilities, which softmax preserves; taking it before the exp keeps
    near-ties exact. np.argmax picks the lowest index on ties."""
    if num_classes == 2:
        return (raw[:, 0] > THRESHOLD).astype(int)
    return np.argmax(raw, axis=1)


def predict(state: StateVector, num_classes: int) -> tuple[int, ClassProbabilities]:
    if num_classes > 2 and num_classes > state.num_qubits:
        raise ValueError(f"{num_classes} classes need at least as many qubits")
    probs = (np.abs(state.amplitudes) ** 2).reshape(1, -1)
    raw, normalized = class_scores(probs, state.num_qubits, num_classes)
    label = int(labels_from_scores(raw, num_classes)[0])
    if num_classes == 2:
        return label, ClassProbabilities(raw[0], normalized[0, 0])
    return label, ClassProbabilities(raw[0], normalized[0])


def cross_entropy_loss(probabilities: ClassProbabilities, target: int) -> float:
    p = np.asarray(probabilities.normalized, dtype=float)
    if p.ndim == 0:
        q = float(np.clip(p, CLAMP, 1 - CLAMP))
        return float(-(target * np.log(q) + (1 - target) * np.log(1 - q)))
    if not 0 <= target < p.size:
        raise ValueError(f"label {target} out of range for {p.size} classes")
    return float(-np.log(np.clip(p[target], CLAMP, 1 - CLAMP)))


@dataclass
class CrossEntropy(LossSpec):
    """Batched cross-entropy on the classifier readout, differentiable in p."""

    labels: np.ndarray
    num_qubits: int
    num_classes: int

    def evaluate(self, probs):
        y = np.asarray(self.labels, dtype=int)
        bits = bit_matrix(self.num_qubits, readout_qubits(self.num_classes))
        raw, normalized = class_scores(probs, self.num_qubits, self.num_classes)
        if self.num_classes == 2:
            p = normalized[:, 0]
            q = np.clip(p, CLAMP, 1 - CLAMP)
            values = -(y * np.log(q) + (1 - y) * np.log(1 - q))
            inside = (p > CLAMP) & (p < 1 - CLAMP)
            dz = np.where(inside, -y / q + (1 - y) / (1 - q), 0.0)[:, None]
        else:
            rows = np.arange(len(y))
            s = normalized[rows, y]
            q = np.clip(s, CLAMP, 1 - CLAMP)
            values = -np.log(q)
            inside = (s > CLAMP) & (s < 1 - CLAMP)
            onehot = np.zeros_like(normalized)
            onehot[rows, y] = 1.0
            dz = np.where(inside[:, None], normalized - onehot, 0.0)
        return values, dz @ bits.T


# --------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray

    @classmethod
    def zeros(cls, size: int) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size))


def adam_step(params, grads, state: AdamState, t: int, lr: float) -> tuple[np.ndarray, AdamState]:
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if params.shape != grads.shape or state.m.shape != params.shape:
        raise ValueError(f"shape mismatch: params {params.shape}, grads {grads.shape}")
    if t < 1:
        raise ValueError("Adam step index starts at 1")
    m = BETA1 * state.m + (1 - BETA1) * grads
    v = BETA2 * state.v + (1 - BETA2) * grads**2
    m_hat = m / (1 - BETA1**t)
    v_hat = v / (1 - BETA2**t)
    return params - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS), AdamState(m, v)


# --------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 30
    batch_size: int = 10
    repetitions: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.repetitions < 1:
            raise ValueError("learning_rate, batch_size and repetitions must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass
class Model:
    config: ModelConfig
    params: np.ndarray

    def scores(self, features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        psi = run_model(self.config, features, self.params)
        return class_scores(np.abs(psi) ** 2, self.config.num_qubits, self.config.num_classes)

    def predict(self, features: np.ndarray) -> np.ndarray:
        raw, _ = self.scores(features)
        return labels_from_scores(raw, self.config.num_classes)


@dataclass
class TrainResult:
    model: Model
    initial_params: np.ndarray
    loss_history: list[float] = field(default_factory=list)
    accuracy_history: list[float] = field(default_factory=list)


def init_params(config: ModelConfig, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(0.0, 2.0 * np.pi, size=param_count(config))


def train_model(config: ModelConfig, features: np.ndarray, labels: np.ndarray, tc: TrainConfig) -> TrainResult:
    """Adam on mini-batches; one update per batch using the batch-mean gradient.

    The seeded generator draws the initial parameters and then one shuffle per
    epoch. History entries are the sample-weighted loss and accuracy seen
    during each epoch's forward passes.
    """
    features = np.atleast_2d(np.asarray(features, dtype=float))
    labels = np.asarray(labels, dtype=int)
    if len(features) == 0:
        raise ValueError("training set is empty")
    if len(features) != len(labels):
        raise ValueError("features and labels differ in length")
    rng = np.random.default_rng(tc.seed)
    params = init_params(config, rng)
    result = TrainResult(Model(config, params), params.copy())
    state = AdamState.zeros(params.size)
    n, classes = config.num_qubits, config.num_classes
    step = 0
    for _ in range(tc.epochs):
        order = rng.permutation(len(features))
        loss_sum, correct = 0.0, 0
        for start in range(0, len(order), tc.batch_size):
            idx = order[start : start + tc.batch_size]
            batch_labels = labels[idx]
            ops = model_ops(config, features[idx])
            loss = CrossEntropy(batch_labels, n, classes)
            values, grad, probs = tape_adjoint(ops, n, len(idx), params, loss)
            raw, _ = class_scores(probs, n, classes)
            correct += int(np.sum(labels_from_scores(raw, classes) == batch_labels))
            loss_sum += float(np.sum(values))
            step += 1
            params, state = adam_step(params, grad, state, step, tc.learning_rate)
        result.loss_history.append(loss_sum / len(features))
        result.accuracy_history.append(correct / len(features))
    result.model.params = params
    return result


# --------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    balanced_accuracy: float
    precision: float
    recall: float
    f1: float
    specificity: float
    undefined: tuple[str, ...] = ()

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}


METRIC_NAMES = ("accuracy", "balanced_accuracy", "precision", "recall", "f1", "specificity")


@dataclass(frozen=True)
class Evaluation:
    metrics: Metrics
    confusion: tuple[ConfusionMatrix, ...]


def _ratio(num: float, den: float, name: str, undefined: set[str]) -> float:
    if den == 0:
        undefined.add(name)
        return 0.0
    return num / den


def binary_scores(cm: ConfusionMatrix, undefined: set[str]) -> dict[str, float]:
    precision = _ratio(cm.tp, cm.tp + cm.fp, "precision", undefined)
    recall = _ratio(cm.tp, cm.tp + cm.fn, "recall", undefined)
    f1 = _ratio(2 * precision * recall, precision + recall, "f1", undefined)
    specificity = _ratio(cm.tn, cm.tn + cm.fp, "specificity", undefined)
    return {
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "specificity": specificity,
        "balanced_accuracy": (recall + specificity) / 2,
    }


def one_vs_rest(y_true: np.ndarray, y_pred: np.ndarray, positive: int) -> ConfusionMatrix:
    t = y_true == positive
    p = y_pred == positive
    return ConfusionMatrix(
        tp=int(np.sum(t & p)), tn=int(np.sum(~t & ~p)), fp=int(np.sum(~t & p)), fn=int(np.sum(t & ~p))
    )


def metrics_from_predictions(y_true, y_pred, num_classes: int) -> Evaluation:
    """Binary: class 1 is positive. Multi-class: accuracy is the fraction
    correct and every other metric is a one-vs-rest macro average."""
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    if y_true.size == 0:
        raise ValueError("cannot evaluate an empty dataset")
    undefined: set[str] = set()
    accuracy = float(np.sum(y_true == y_pred)) / y_true.size
    if num_classes == 2:
        cms = (one_vs_rest(y_true, y_pred, 1),)
        scores = binary_scores(cms[0], undefined)
    else:
        cms = tuple(one_vs_rest(y_true, y_pred, c) for c in range(num_classes))
        per_class = [binary_scores(cm, undefined) for cm in cms]
        scores = {k: sum(s[k] for s in per_class) / num_classes for k in per_class[0]}
    metrics = Metrics(accuracy=accuracy, undefined=tuple(sorted(undefined)), **scores)
    return Evaluation(metrics, cms)


def evaluate_metrics(model: Model, features: np.ndarray, labels: np.ndarray) -> Evaluation:
    features = np.atleast_2d(features)
    if len(features) == 0:
        raise ValueError("cannot evaluate an empty dataset")
    return metrics_from_predictions(labels, model.predict(features), model.config.num_classes)
