"""Compiled tapes: the fast execution path used for training and evaluation.

A tape of :class:`~vqcbench.circuit.Op` is lowered to a short list of
kernels. Runs of X/CNOT gates collapse into one basis permutation, runs of
fixed uncontrolled gates on one qubit collapse into one 2x2 matrix (shared or
per sample), and every kernel acts through a broadcast matmul on a reshaped
view, so one gate costs one numpy call. Arrays may carry extra leading axes in
front of ``(batch, 2**n)``; the adjoint sweep uses that to push the state and
its adjoint through each inverse gate together.

The plain op-by-op interpreter in :mod:`vqcbench.circuit` is the reference
this module is tested against.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .circuit import Op, op_matrix
from .sim import _PAULI, GateKind, pair_indices, rot_matrix, rotation_matrix, zero_batch

_MY = -0.5j * _PAULI[GateKind.Y]
_MZ = -0.5j * _PAULI[GateKind.Z]
_GENERATOR = {
    GateKind.RX: -0.5j * _PAULI[GateKind.X],
    GateKind.RY: _MY,
    GateKind.RZ: _MZ,
}


@lru_cache(maxsize=None)
def _x_permutation(num_qubits: int, target: int, controls: tuple) -> np.ndarray:
    perm = np.arange(1 << num_qubits)
    i0, i1 = pair_indices(num_qubits, target, controls)
    perm[i0], perm[i1] = i1, i0
    return perm


def _adjoint(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


@dataclass
class _Perm:
    perm: np.ndarray
    inverse: np.ndarray


@dataclass
class _Fixed:
    target: int
    matrix: np.ndarray  # (2, 2) or (batch, 2, 2)
    controls: tuple = ()


@dataclass
class _Train:
    target: int
    kind: GateKind  # ROT or a single rotation
    param: int


class Program:
    """Kernel list for one tape on ``num_qubits`` qubits and a fixed batch."""

    def __init__(self, ops: Sequence[Op], num_qubits: int, batch: int):
        self.num_qubits = num_qubits
        self.batch = batch
        self.kernels: list = []
        for op in ops:
            self._push(op)

    # ---- lowering

    def _push(self, op: Op) -> None:
        n = self.num_qubits
        last = self.kernels[-1] if self.kernels else None
        if op.kind == GateKind.X:
            perm = _x_permutation(n, op.target, tuple(op.controls))
            if isinstance(last, _Perm):
                last.perm = last.perm[perm]
                last.inverse = np.argsort(last.perm)
            else:
                self.kernels.append(_Perm(perm, np.argsort(perm)))
            return
        if op.trainable:
            self.kernels.append(_Train(op.target, op.kind, op.param))
            return
        m = op_matrix(op, None)
        if m.ndim == 3 and m.shape[0] != self.batch:
            raise ValueError(f"per-sample angles for {m.shape[0]} rows, batch is {self.batch}")
        if (
            not op.controls
            and isinstance(last, _Fixed)
            and not last.controls
            and last.target == op.target
        ):
            last.matrix = m @ last.matrix
            return
        self.kernels.append(_Fixed(op.target, m, tuple(op.controls)))

    # ---- kernels

    def _view(self, psi: np.ndarray, target: int) -> np.ndarray:
        n = self.num_qubits
        return psi.reshape(psi.shape[:-1] + (1 << target, 2, 1 << (n - 1 - target)))

    def _apply(self, psi: np.ndarray, target: int, m: np.ndarray, controls: tuple = ()) -> np.ndarray:
        if controls:
            i0, i1 = pair_indices(self.num_qubits, target, controls)
            out = psi.copy()
            a0, a1 = psi[..., i0], psi[..., i1]
            if m.ndim == 3:
                # per-sample (batch, 1) coefficients broadcast over the pairs
                m = m[:, :, :, None]
                m00, m01, m10, m11 = m[:, 0, 0], m[:, 0, 1], m[:, 1, 0], m[:, 1, 1]
            else:
                m00, m01, m10, m11 = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
            out[..., i0] = m00 * a0 + m01 * a1
            out[..., i1] = m10 * a0 + m11 * a1
            return out
        if m.ndim == 3:
            m = m[:, None]
        return (m @ self._view(psi, target)).reshape(psi.shape)

    def _train_tables(self, params: np.ndarray) -> tuple[list[np.ndarray], list[list]]:
        """Matrix and (param index, U^dagger dU/dp) pairs for every trainable
        kernel, computed in one vectorized pass."""
        train = [k for k in self.kernels if isinstance(k, _Train)]
        mats: list = [None] * len(train)
        gens: list = [None] * len(train)
        rot = [i for i, k in enumerate(train) if k.kind == GateKind.ROT]
        if rot:
            base = np.array([train[i].param for i in rot])
            phi, theta, gamma = params[base], params[base + 1], params[base + 2]
            u = rot_matrix(phi, theta, gamma)
            rz_g = rotation_matrix(GateKind.RZ, gamma)
            g_phi = _adjoint(u) @ _MZ @ u
            g_theta = _adjoint(rz_g) @ _MY @ rz_g
            for j, i in enumerate(rot):
                mats[i] = u[j]
                p = int(base[j])
                gens[i] = [(p, g_phi[j]), (p + 1, g_theta[j]), (p + 2, _MZ)]
        for i, k in enumerate(train):
            if k.kind != GateKind.ROT:
                mats[i] = rotation_matrix(k.kind, params[k.param])
                gens[i] = [(k.param, _GENERATOR[k.kind])]
        return mats, gens

    def forward(self, params: np.ndarray | None = None, psi: np.ndarray | None = None, _mats=None) -> np.ndarray:
        if psi is None:
            psi = zero_batch(self.num_qubits, self.batch)
        if _mats is None and any(isinstance(k, _Train) for k in self.kernels):
            _mats = self._train_tables(np.asarray(params, dtype=float))[0]
        t = 0
        for k in self.kernels:
            if isinstance(k, _Perm):
                psi = psi[..., k.perm]
            elif isinstance(k, _Fixed):
                psi = self._apply(psi, k.target, k.matrix, k.controls)
            else:
                psi = self._apply(psi, k.target, _mats[t])
                t += 1
        return psi

    def adjoint(self, params: np.ndarray, loss) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-sample losses, batch-mean gradient and forward probabilities."""
        params = np.asarray(params, dtype=float)
        mats, gens = self._train_tables(params)
        psi = self.forward(params, _mats=mats)
        probs = np.abs(psi) ** 2
        values, dprobs = loss.evaluate(probs)
        grad = np.zeros(params.size)
        first = next((i for i, k in enumerate(self.kernels) if isinstance(k, _Train)), None)
        if first is None:
            return values, grad, probs
        # stacked[0] is the state, stacked[1] the adjoint (dL/dp) * psi
        stacked = np.stack([psi, dprobs * psi])
        t = len(mats)
        for k in reversed(self.kernels[first:]):
            if isinstance(k, _Perm):
                stacked = stacked[..., k.inverse]
            elif isinstance(k, _Fixed):
                stacked = self._apply(stacked, k.target, _adjoint(k.matrix), k.controls)
            else:
                t -= 1
                stacked = self._apply(stacked, k.target, _adjoint(mats[t]))
                # <lam_after| dU |phi_before> = <lam_before| U^dagger dU |phi_before>
                v = self._view(stacked, k.target)
                rho = np.einsum("blir,bljr->ij", np.conj(v[1]), v[0])
                for p, g in gens[t]:
                    grad[p] += 2.0 * float(np.sum(g * rho).real)
        return values, grad / self.batch, probs
