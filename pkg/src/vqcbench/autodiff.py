"""Gradients of probability-based losses with respect to ansatz parameters.

The adjoint sweep is the training path. Parameter shift and central finite
differences are kept as independent checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .ansatz import ModelConfig, _params_flat, model_ops, param_count
from .circuit import Op, run_ops
from .engine import Program
from .sim import zero_batch

SHIFT = np.pi / 2


@lru_cache(maxsize=64)
def bit_matrix(num_qubits: int, qubits: tuple[int, ...]) -> np.ndarray:
    """``(2**n, len(qubits))`` 0/1 matrix: entry [i, k] is the bit of qubit k in i."""
    index = np.arange(1 << num_qubits)
    out = np.stack([(index >> (num_qubits - 1 - q)) & 1 for q in qubits], axis=1).astype(float)
    out.setflags(write=False)
    return out


class LossSpec:
    """A loss defined on basis-state probabilities.

    ``evaluate`` maps a ``(batch, 2**n)`` probability array to per-sample
    losses and their derivatives with respect to every probability.
    """

    differentiable = True

    def evaluate(self, probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def values(self, probs: np.ndarray) -> np.ndarray:
        return self.evaluate(probs)[0]


@dataclass
class QubitOneLoss(LossSpec):
    """Loss equal to P(|1>) on one qubit."""

    qubit: int
    num_qubits: int

    def evaluate(self, probs):
        bits = bit_matrix(self.num_qubits, (self.qubit,))
        values = (probs @ bits)[:, 0]
        return values, np.broadcast_to(bits[:, 0], probs.shape)


@dataclass
class ConstantLoss(LossSpec):
    value: float = 1.0

    def evaluate(self, probs):
        return np.full(probs.shape[0], self.value), np.zeros_like(probs)


@dataclass
class SampledLoss(LossSpec):
    """Wraps a loss evaluated on shot-sampled frequencies; has no gradient."""

    inner: LossSpec
    shots: int = 1000
    differentiable = False

    def evaluate(self, probs):
        raise TypeError("shot-sampled losses have no analytic gradient")


@dataclass(frozen=True)
class LossGradient:
    value: float
    grad: np.ndarray


def _check_differentiable(loss: LossSpec) -> None:
    if not getattr(loss, "differentiable", False):
        raise TypeError(f"{type(loss).__name__} is not differentiable")


def tape_adjoint(
    ops: Sequence[Op], num_qubits: int, batch: int, params: np.ndarray, loss: LossSpec
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Forward pass plus reverse sweep over a tape.

    Returns per-sample losses, the batch-mean gradient and the forward
    probabilities. Trainable ops must be uncontrolled.
    """
    _check_differentiable(loss)
    if any(op.trainable and op.controls for op in ops):
        raise ValueError("trainable ops must be uncontrolled")
    return Program(ops, num_qubits, batch).adjoint(np.asarray(params, dtype=float), loss)


def _tape_probs(ops, num_qubits, batch, params):
    psi = run_ops(zero_batch(num_qubits, batch), num_qubits, ops, params)
    return np.abs(psi) ** 2


def tape_parameter_shift(
    ops: Sequence[Op], num_qubits: int, batch: int, params: np.ndarray, loss: LossSpec
) -> tuple[np.ndarray, np.ndarray]:
    """Chain rule through the loss: dL/dθ = Σ_i dL/dp_i · ∂p_i/∂θ, with each
    ∂p_i/∂θ taken from the ±π/2 shift of the single rotation owning θ."""
    _check_differentiable(loss)
    params = np.asarray(params, dtype=float)
    probs = _tape_probs(ops, num_qubits, batch, params)
    values, dprobs = loss.evaluate(probs)
    grad = np.zeros(params.size)
    for k in range(params.size):
        shifted = params.copy()
        shifted[k] += SHIFT
        plus = _tape_probs(ops, num_qubits, batch, shifted)
        shifted[k] -= 2 * SHIFT
        minus = _tape_probs(ops, num_qubits, batch, shifted)
        grad[k] = np.sum(dprobs * (plus - minus) / 2.0) / batch
    return values, grad


def tape_finite_difference(
    ops: Sequence[Op], num_qubits: int, batch: int, params: np.ndarray, loss: LossSpec, h: float = 1e-5
) -> tuple[np.ndarray, np.ndarray]:
    if h <= 0:
        raise ValueError("step h must be positive")
    params = np.asarray(params, dtype=float)
    values = loss.values(_tape_probs(ops, num_qubits, batch, params))
    grad = np.zeros(params.size)
    for k in range(params.size):
        shifted = params.copy()
        shifted[k] += h
        up = loss.values(_tape_probs(ops, num_qubits, batch, shifted)).mean()
        shifted[k] -= 2 * h
        down = loss.values(_tape_probs(ops, num_qubits, batch, shifted)).mean()
        grad[k] = (up - down) / (2 * h)
    return values, grad


def _model_tape(config: ModelConfig, features, params):
    features = np.atleast_2d(np.asarray(features, dtype=float))
    flat = _params_flat(params, config.layers, config.num_qubits)
    return model_ops(config, features), features.shape[0], flat


def adjoint_gradient(config: ModelConfig, features, params, loss_spec: LossSpec) -> LossGradient:
    """Mean loss and gradient over a feature batch (or a single vector)."""
    ops, batch, flat = _model_tape(config, features, params)
    values, grad, _ = tape_adjoint(ops, config.num_qubits, batch, flat, loss_spec)
    assert grad.size == param_count(config)
    return LossGradient(float(values.mean()), grad)


def parameter_shift_gradient(config: ModelConfig, features, params, loss_spec: LossSpec) -> LossGradient:
    ops, batch, flat = _model_tape(config, features, params)
    values, grad = tape_parameter_shift(ops, config.num_qubits, batch, flat, loss_spec)
    return LossGradient(float(values.mean()), grad)


def finite_difference_gradient(
    config: ModelConfig, features, params, loss_spec: LossSpec, h: float = 1e-5
) -> LossGradient:
    ops, batch, flat = _model_tape(config, features, params)
    values, grad = tape_finite_difference(ops, config.num_qubits, batch, flat, loss_spec, h)
    return LossGradient(float(values.mean()), grad)

