"""Dense statevector simulation.

Basis convention: qubit 0 is the most significant bit of the basis index, so
for two qubits the amplitudes are ordered |00>, |01>, |10>, |11> with the left
bit belonging to qubit 0. Every marginal, every controlled gate and the
Mottonen recursion in :mod:`vqcbench.encoding` rely on this ordering.

Internally every routine works on a batch of flat amplitude arrays of shape
``(batch, 2**n)``; single states are a batch of one. Gates touch the amplitude
pairs that differ only in the target bit, so a gate costs O(2**n) instead of
the O(4**n) of an expanded matrix product.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

MAX_QUBITS = 24
NORM_TOL = 1e-9


class GateKind(str, Enum):
    RX = "RX"
    RY = "RY"
    RZ = "RZ"
    H = "H"
    X = "X"
    Y = "Y"
    Z = "Z"
    ROT = "ROT"
    CNOT = "CNOT"


_ANGLE_COUNT = {
    GateKind.RX: 1,
    GateKind.RY: 1,
    GateKind.RZ: 1,
    GateKind.ROT: 3,
}

ROTATIONS = (GateKind.RX, GateKind.RY, GateKind.RZ)

_I2 = np.eye(2, dtype=complex)
_PAULI = {
    GateKind.X: np.array([[0, 1], [1, 0]], dtype=complex),
    GateKind.Y: np.array([[0, -1j], [1j, 0]], dtype=complex),
    GateKind.Z: np.array([[1, 0], [0, -1]], dtype=complex),
}
_HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2.0)
_CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)

ACTIVE_ON_ONE = 1
ACTIVE_ON_ZERO = 0


@dataclass(frozen=True)
class GateSpec:
    kind: GateKind
    angles: tuple[float, ...] = ()

    def __post_init__(self):
        kind = GateKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))
        expected = _ANGLE_COUNT.get(kind, 0)
        if len(self.angles) != expected:
            raise ValueError(
                f"{kind.value} takes {expected} angle(s), got {len(self.angles)}"
            )


@dataclass(frozen=True)
class ControlledApplication:
    """Control qubits with polarity; ``ACTIVE_ON_ZERO`` fires on |0>."""

    controls: tuple[tuple[int, int], ...]
    target: int

    def __post_init__(self):
        controls = tuple((int(q), int(p)) for q, p in self.controls)
        object.__setattr__(self, "controls", controls)
        qubits = [q for q, _ in controls]
        if len(set(qubits)) != len(qubits):
            raise ValueError("control qubits must be distinct")
        if self.target in qubits:
            raise ValueError("target qubit cannot also be a control")
        for _, polarity in controls:
            if polarity not in (ACTIVE_ON_ZERO, ACTIVE_ON_ONE):
                raise ValueError(f"invalid control polarity {polarity!r}")


@dataclass(frozen=True)
class StateVector:
    num_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if self.num_qubits < 1 or amps.size != 1 << self.num_qubits:
            raise ValueError(
                f"{amps.size} amplitudes do not describe {self.num_qubits} qubit(s)"
            )
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (squared norm {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_amplitudes(cls, amplitudes: Sequence[complex]) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        n = int(round(np.log2(amps.size))) if amps.size else 0
        return cls(n, amps)

    def batch(self) -> np.ndarray:
        """Writable ``(1, 2**n)`` copy for the batched kernels."""
        return self.amplitudes.reshape(1, -1).copy()


def fidelity(a: StateVector | np.ndarray, b: StateVector | np.ndarray) -> float:
    """|<a|b>|^2, insensitive to global phase."""
    va = a.amplitudes if isinstance(a, StateVector) else np.asarray(a).reshape(-1)
    vb = b.amplitudes if isinstance(b, StateVector) else np.asarray(b).reshape(-1)
    return float(abs(np.vdot(va, vb)) ** 2)


def _check_qubit_count(num_qubits: int) -> None:
    if not 1 <= num_qubits <= MAX_QUBITS:
        raise ValueError(f"num_qubits must be in [1, {MAX_QUBITS}], got {num_qubits}")


def new_zero_state(num_qubits: int) -> StateVector:
    _check_qubit_count(num_qubits)
    amps = np.zeros(1 << num_qubits, dtype=complex)
    amps[0] = 1.0
    return StateVector(num_qubits, amps)


def zero_batch(num_qubits: int, batch: int) -> np.ndarray:
    _check_qubit_count(num_qubits)
    psi = np.zeros((batch, 1 << num_qubits), dtype=complex)
    psi[:, 0] = 1.0
    return psi


# --------------------------------------------------------------------------
# matrices


def rotation_matrix(kind: GateKind, angle) -> np.ndarray:
    """RX/RY/RZ matrix; ``angle`` may be a scalar or a 1-D array (batched)."""
    theta = np.asarray(angle, dtype=float)
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    out = np.empty(theta.shape + (2, 2), dtype=complex)
    if kind == GateKind.RX:
        out[..., 0, 0] = c
        out[..., 0, 1] = -1j * s
        out[..., 1, 0] = -1j * s
        out[..., 1, 1] = c
    elif kind == GateKind.RY:
        out[..., 0, 0] = c
        out[..., 0, 1] = -s
        out[..., 1, 0] = s
        out[..., 1, 1] = c
    elif kind == GateKind.RZ:
        out[..., 0, 0] = c - 1j * s
        out[..., 0, 1] = 0.0
        out[..., 1, 0] = 0.0
        out[..., 1, 1] = c + 1j * s
    else:
        raise ValueError(f"{kind} is not a rotation")
    return out


def rot_matrix(phi, theta, gamma) -> np.ndarray:
    """ROT(phi, theta, gamma) = RZ(phi) RY(theta) RZ(gamma); RZ(gamma) acts first."""
    return (
        rotation_matrix(GateKind.RZ, phi)
        @ rotation_matrix(GateKind.RY, theta)
        @ rotation_matrix(GateKind.RZ, gamma)
    )


def rotation_derivative(kind: GateKind, angle) -> np.ndarray:
    """d/dθ of exp(-iθP/2), i.e. (-i/2)·P·R(θ)."""
    return -0.5j * (_PAULI[_ROTATION_AXIS[kind]] @ rotation_matrix(kind, angle))


_ROTATION_AXIS = {GateKind.RX: GateKind.X, GateKind.RY: GateKind.Y, GateKind.RZ: GateKind.Z}


def gate_matrix(gate: GateSpec) -> np.ndarray:
    kind = gate.kind
    if kind in ROTATIONS:
        return rotation_matrix(kind, gate.angles[0])
    if kind == GateKind.ROT:
        return rot_matrix(*gate.angles)
    if kind == GateKind.H:
        return _HADAMARD.copy()
    if kind in _PAULI:
        return _PAULI[kind].copy()
    if kind == GateKind.CNOT:
        return _CNOT.copy()
    raise ValueError(f"unknown gate kind {kind!r}")


# --------------------------------------------------------------------------
# kernels


def _bit_of(index: np.ndarray, qubit: int, num_qubits: int) -> np.ndarray:
    return (index >> (num_qubits - 1 - qubit)) & 1


@lru_cache(maxsize=4096)
def pair_indices(
    num_qubits: int, target: int, controls: tuple[tuple[int, int], ...] = ()
) -> tuple[np.ndarray, np.ndarray]:
    """Basis indices (bit 0, bit 1) for the target qubit, restricted to the
    basis states where every control polarity is met."""
    index = np.arange(1 << num_qubits)
    keep = _bit_of(index, target, num_qubits) == 0
    for qubit, polarity in controls:
        keep &= _bit_of(index, qubit, num_qubits) == polarity
    i0 = index[keep]
    i1 = i0 | (1 << (num_qubits - 1 - target))
    i0.setflags(write=False)
    i1.setflags(write=False)
    return i0, i1


def _validate_indices(num_qubits: int, target: int, controls) -> None:
    for q in [target, *(c for c, _ in controls)]:
        if not 0 <= q < num_qubits:
            raise IndexError(f"qubit {q} out of range for {num_qubits} qubit(s)")
    if target in [c for c, _ in controls]:
        raise ValueError("target qubit cannot also be a control")


def apply_matrix(
    psi: np.ndarray,
    num_qubits: int,
    matrix: np.ndarray,
    target: int,
    controls: tuple[tuple[int, int], ...] = (),
) -> None:
    """Apply a 2x2 matrix, shared ``(2, 2)`` or per-sample ``(batch, 2, 2)``,
    in place on ``psi`` of shape ``(batch, 2**n)``."""
    i0, i1 = pair_indices(num_qubits, target, controls)
    a0 = psi[:, i0]
    a1 = psi[:, i1]
    if matrix.ndim == 3:
        m = matrix[:, :, :, None]
        psi[:, i0] = m[:, 0, 0] * a0 + m[:, 0, 1] * a1
        psi[:, i1] = m[:, 1, 0] * a0 + m[:, 1, 1] * a1
    else:
        psi[:, i0] = matrix[0, 0] * a0 + matrix[0, 1] * a1
        psi[:, i1] = matrix[1, 0] * a0 + matrix[1, 1] * a1


def apply_x(
    psi: np.ndarray, num_qubits: int, target: int, controls: tuple[tuple[int, int], ...] = ()
) -> None:
    i0, i1 = pair_indices(num_qubits, target, controls)
    a0 = psi[:, i0]
    psi[:, i0] = psi[:, i1]
    psi[:, i1] = a0


def apply_gate(
    state: StateVector,
    gate: GateSpec,
    target: int,
    controls: ControlledApplication | Iterable[tuple[int, int]] | None = None,
) -> StateVector:
    """Return a new state with ``gate`` applied to ``target``.

    CNOT needs exactly one control. Any other single-qubit kind may carry an
    arbitrary list of controls with per-control polarity.
    """
    n = state.num_qubits
    if controls is None:
        ctrl: tuple[tuple[int, int], ...] = ()
    elif isinstance(controls, ControlledApplication):
        if controls.target != target:
            raise ValueError("controlled application names a different target")
        ctrl = controls.controls
    else:
        ctrl = ControlledApplication(tuple(controls), target).controls
    _validate_indices(n, target, ctrl)
    psi = state.batch()
    if gate.kind == GateKind.CNOT:
        if len(ctrl) != 1:
            raise ValueError("CNOT takes exactly one control")
        apply_x(psi, n, target, ctrl)
    elif gate.kind == GateKind.X:
        apply_x(psi, n, target, ctrl)
    else:
        apply_matrix(psi, n, gate_matrix(gate), target, ctrl)
    return StateVector(n, psi[0])


# --------------------------------------------------------------------------
# readout


def state_probabilities(state: StateVector) -> np.ndarray:
    return np.abs(state.amplitudes) ** 2


def qubit_one_probabilities(probs: np.ndarray, num_qubits: int, qubits: Sequence[int]) -> np.ndarray:
    """Marginal P(|1>) per listed qubit for a ``(batch, 2**n)`` probability array."""
    shaped = probs.reshape((probs.shape[0],) + (2,) * num_qubits)
    out = np.empty((probs.shape[0], len(qubits)))
    for k, q in enumerate(qubits):
        axes = tuple(1 + a for a in range(num_qubits) if a != q)
        out[:, k] = shaped.sum(axis=axes)[:, 1]
    return out


def qubit_one_probability(state: StateVector, qubit: int) -> float:
    if not 0 <= qubit < state.num_qubits:
        raise IndexError(f"qubit {qubit} out of range for {state.num_qubits} qubit(s)")
    probs = state_probabilities(state).reshape(1, -1)
    return float(qubit_one_probabilities(probs, state.num_qubits, [qubit])[0, 0])


def bloch_vector(state: StateVector) -> tuple[float, float, float]:
    if state.num_qubits != 1:
        raise ValueError("Bloch coordinates are defined for single-qubit states only")
    c0, c1 = state.amplitudes
    coherence = np.conj(c0) * c1
    return (
        float(2 * coherence.real),
        float(2 * coherence.imag),
        float(abs(c0) ** 2 - abs(c1) ** 2),
    )


def kron_operator(num_qubits: int, matrix: np.ndarray, target: int, controls=()) -> np.ndarray:
    """Full 2**n x 2**n operator of a (controlled) single-qubit gate.

    Builds P_met ⊗ U + P_unmet ⊗ I from Kronecker products. Slow by design:
    used as an independent check on :func:`apply_matrix`.
    """
    dim = 1 << num_qubits
    projectors = {0: np.array([[1, 0], [0, 0]], dtype=complex), 1: np.array([[0, 0], [0, 1]], dtype=complex)}

    def chain(factors):
        out = np.array([[1.0 + 0j]])
        for f in factors:
            out = np.kron(out, f)
        return out

    control_map = dict(controls)
    met = [
        projectors[control_map[q]] if q in control_map else (matrix if q == target else _I2)
        for q in range(num_qubits)
    ]
    op = chain(met)
    if control_map:
        op = op + (np.eye(dim) - chain(
            [projectors[control_map[q]] if q in control_map else _I2 for q in range(num_qubits)]
        ))
    return op
