"""Strongly entangling ansatz and full model circuits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import Op, cnot, run_ops
from .engine import Program
from .encoding import EncodingSpec, Family, angle_encoding_ops, mottonen_ops
from .sim import GateKind, StateVector

REUPLOAD_BLOCK = 2  # ansatz layers between consecutive uploads


@dataclass(frozen=True)
class ModelConfig:
    encoding: EncodingSpec
    num_qubits: int
    layers: int
    reuploading: bool = False
    num_classes: int = 2
    decompose_mottonen: bool = True

    def __post_init__(self):
        if self.num_qubits < 1:
            raise ValueError("num_qubits must be >= 1")
        if self.layers < 0:
            raise ValueError("layers must be >= 0")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.num_classes > 2 and self.num_classes > self.num_qubits:
            raise ValueError(
                f"{self.num_classes} classes need at least as many qubits, got {self.num_qubits}"
            )
        if self.encoding.family == Family.BASIS:
            raise ValueError("basis encoding is not supported as a model embedding")
        if self.reuploading and self.layers % REUPLOAD_BLOCK:
            raise ValueError(
                f"re-uploading needs a multiple of {REUPLOAD_BLOCK} layers, got {self.layers}"
            )

    @property
    def key(self) -> str:
        return f"{self.encoding.name}|L{self.layers}|RU{int(self.reuploading)}"

    @property
    def feature_width(self) -> int:
        if self.encoding.family == Family.AMPLITUDE:
            return 1 << self.num_qubits
        return self.num_qubits


def param_count(config: ModelConfig) -> int:
    return config.layers * config.num_qubits * 3


def entangler_range(layer: int, num_qubits: int) -> int:
    return (layer % (num_qubits - 1)) + 1


def layer_ops(layer: int, num_qubits: int) -> list[Op]:
    """One layer: Rot on every qubit, then the CNOT ring of this layer's range.

    Params are laid out [layer][qubit][phi, theta, gamma]; each ROT op
    points at its phi slot.
    """
    ops = [Op(GateKind.ROT, q, param=(layer * num_qubits + q) * 3) for q in range(num_qubits)]
    if num_qubits > 1:
        r = entangler_range(layer, num_qubits)
        ops.extend(cnot(q, (q + r) % num_qubits) for q in range(num_qubits))
    return ops


def ansatz_ops(num_qubits: int, layers: range | int) -> list[Op]:
    layers = range(layers) if isinstance(layers, int) else layers
    ops = []
    for layer in layers:
        ops.extend(layer_ops(layer, num_qubits))
    return ops


def _params_flat(params: np.ndarray, layers: int, num_qubits: int) -> np.ndarray:
    params = np.asarray(params, dtype=float)
    if params.size != layers * num_qubits * 3 or (
        params.ndim == 3 and params.shape != (layers, num_qubits, 3)
    ):
        raise ValueError(
            f"params of shape {params.shape} do not match {layers} layer(s) x {num_qubits} qubit(s) x 3"
        )
    if not np.all(np.isfinite(params)):
        raise ValueError("params must be finite")
    return params.reshape(-1)


def strongly_entangling_layers(state: StateVector, params: np.ndarray) -> StateVector:
    params = np.asarray(params, dtype=float)
    if params.ndim != 3 or params.shape[1] != state.num_qubits or params.shape[2] != 3:
        raise ValueError(
            f"params of shape {params.shape} do not fit {state.num_qubits} qubit(s)"
        )
    flat = params.reshape(-1)
    psi = state.batch()
    run_ops(psi, state.num_qubits, ansatz_ops(state.num_qubits, params.shape[0]), flat)
    return StateVector(state.num_qubits, psi[0])


def encoding_ops(config: ModelConfig, features: np.ndarray) -> list[Op]:
    """Embedding tape for a ``(batch, width)`` feature array."""
    features = np.atleast_2d(np.asarray(features, dtype=float))
    if features.shape[1] != config.feature_width:
        raise ValueError(
            f"{config.encoding.name} on {config.num_qubits} qubit(s) needs "
            f"{config.feature_width} features, got {features.shape[1]}"
        )
    if config.encoding.family == Family.AMPLITUDE:
        return mottonen_ops(features, decompose=config.decompose_mottonen)
    return angle_encoding_ops(config.encoding, features)


def model_ops(config: ModelConfig, features: np.ndarray) -> list[Op]:
    """Full tape: [encode][all layers], or with re-uploading
    [encode][2 layers][encode][2 layers]... for the same L layers."""
    embed = encoding_ops(config, features)
    n = config.num_qubits
    if not config.reuploading:
        return embed + ansatz_ops(n, config.layers)
    ops: list[Op] = []
    for start in range(0, config.layers, REUPLOAD_BLOCK):
        ops.extend(embed)
        ops.extend(ansatz_ops(n, range(start, start + REUPLOAD_BLOCK)))
    return ops


def run_model(config: ModelConfig, features: np.ndarray, params: np.ndarray) -> np.ndarray:
    """Final amplitudes for a feature batch, shape ``(batch, 2**n)``."""
    features = np.atleast_2d(features)
    flat = _params_flat(params, config.layers, config.num_qubits)
    program = Program(model_ops(config, features), config.num_qubits, features.shape[0])
    return program.forward(flat)


def build_and_run(config: ModelConfig, features: np.ndarray, params: np.ndarray) -> StateVector:
    features = np.asarray(features, dtype=float)
    if features.ndim != 1:
        raise ValueError("build_and_run takes a single feature vector")
    psi = run_model(config, features.reshape(1, -1), params)
    return StateVector(config.num_qubits, psi[0])
