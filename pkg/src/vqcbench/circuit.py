"""Flat gate tapes executed by the batched kernels in :mod:`vqcbench.sim`."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .sim import (
    ROTATIONS,
    ControlledApplication,
    GateKind,
    GateSpec,
    StateVector,
    apply_matrix,
    apply_x,
    gate_matrix,
    rot_matrix,
    rotation_matrix,
)


@dataclass
class Op:
    """One tape entry.

    ``angle`` is a fixed rotation angle, either a float or a per-sample array
    of shape ``(batch,)``. ``param`` instead indexes the flat trainable
    parameter vector. At most one of the two is set, and only rotations use
    them. A ROT op reads three values: ``angle`` is then a ``(phi, theta,
    gamma)`` triple, or ``param`` points at phi with theta and gamma in the
    next two slots.
    """

    kind: GateKind
    target: int
    controls: tuple[tuple[int, int], ...] = ()
    angle: float | np.ndarray | None = None
    param: int | None = None

    @property
    def trainable(self) -> bool:
        return self.param is not None

    @property
    def gate(self) -> GateSpec:
        if self.kind in ROTATIONS:
            if self.param is not None or np.ndim(self.angle) != 0:
                raise ValueError("only fixed scalar-angle ops convert to a GateSpec")
            return GateSpec(self.kind, (float(self.angle),))
        if self.kind == GateKind.ROT:
            if self.param is not None:
                raise ValueError("only fixed-angle ops convert to a GateSpec")
            return GateSpec(self.kind, tuple(self.angle))
        if self.kind == GateKind.X and len(self.controls) == 1:
            return GateSpec(GateKind.CNOT)
        return GateSpec(self.kind)

    @property
    def control(self) -> ControlledApplication | None:
        if not self.controls:
            return None
        return ControlledApplication(self.controls, self.target)


def cnot(control: int, target: int) -> Op:
    return Op(GateKind.X, target, ((control, 1),))


def op_matrix(op: Op, params: np.ndarray | None, sign: float = 1.0) -> np.ndarray:
    """Matrix of ``op``; ``sign=-1`` gives the inverse for rotations."""
    if op.kind in ROTATIONS:
        angle = params[op.param] if op.param is not None else op.angle
        return rotation_matrix(op.kind, sign * np.asarray(angle))
    if op.kind == GateKind.ROT:
        angles = params[op.param : op.param + 3] if op.param is not None else op.angle
        m = rot_matrix(*angles)
        return m.conj().T if sign < 0 else m
    return gate_matrix(GateSpec(op.kind))


def apply_op(psi: np.ndarray, num_qubits: int, op: Op, params: np.ndarray | None = None) -> None:
    if op.kind == GateKind.X:
        apply_x(psi, num_qubits, op.target, op.controls)
    else:
        apply_matrix(psi, num_qubits, op_matrix(op, params), op.target, op.controls)


def apply_op_inverse(psi: np.ndarray, num_qubits: int, op: Op, params: np.ndarray | None = None) -> None:
    if op.kind == GateKind.X:
        apply_x(psi, num_qubits, op.target, op.controls)
    elif op.kind in ROTATIONS or op.kind == GateKind.ROT:
        apply_matrix(psi, num_qubits, op_matrix(op, params, sign=-1.0), op.target, op.controls)
    else:
        m = gate_matrix(GateSpec(op.kind))
        apply_matrix(psi, num_qubits, m.conj().T, op.target, op.controls)


def run_ops(psi: np.ndarray, num_qubits: int, ops: Iterable[Op], params: np.ndarray | None = None) -> np.ndarray:
    """Execute ``ops`` in place on a ``(batch, 2**n)`` array and return it."""
    for op in ops:
        apply_op(psi, num_qubits, op, params)
    return psi


def run_on_state(state: StateVector, ops: Sequence[Op], params: np.ndarray | None = None) -> StateVector:
    psi = state.batch()
    run_ops(psi, state.num_qubits, ops, params)
    return StateVector(state.num_qubits, psi[0])
