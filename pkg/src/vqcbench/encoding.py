"""Data embeddings: angle strategies, Mottonen amplitude preparation, basis
encoding, plus the equivalence pruning that produces the angle catalog."""

from __future__ import annotations

import csv
import io
import itertools
import os
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .circuit import Op, cnot, run_ops
from .sim import GateKind, StateVector, bloch_vector, zero_batch

ROTATION_TAGS = ("RX", "RY", "RZ")
HADAMARD_TAG = "H"


class Family(str, Enum):
    ANGLE = "Angle"
    AMPLITUDE = "Amplitude"
    BASIS = "Basis"


@dataclass(frozen=True)
class EncodingSpec:
    family: Family
    gate_tags: tuple[str, ...] = ()

    def __post_init__(self):
        family = Family(self.family)
        object.__setattr__(self, "family", family)
        tags = tuple(self.gate_tags)
        object.__setattr__(self, "gate_tags", tags)
        if family != Family.ANGLE:
            if tags:
                raise ValueError(f"{family.value} encoding takes no gate tags")
            return
        if not 1 <= len(tags) <= 4:
            raise ValueError(f"angle encoding needs 1 to 4 tags, got {len(tags)}")
        for i, tag in enumerate(tags):
            if tag == HADAMARD_TAG:
                if i != 0:
                    raise ValueError("H may only appear as the first tag")
            elif tag not in ROTATION_TAGS:
                raise ValueError(f"unknown gate tag {tag!r}")
        rotations = [t for t in tags if t != HADAMARD_TAG]
        if len(set(rotations)) != len(rotations):
            raise ValueError("each rotation may appear at most once")

    @property
    def name(self) -> str:
        if self.family == Family.ANGLE:
            return "-".join(self.gate_tags)
        return self.family.value

    @classmethod
    def parse(cls, name: str) -> "EncodingSpec":
        if name in (Family.AMPLITUDE.value, Family.BASIS.value):
            return cls(Family(name))
        return cls(Family.ANGLE, tuple(name.split("-")))

    def __str__(self) -> str:
        return self.name


AMPLITUDE = EncodingSpec(Family.AMPLITUDE)
BASIS = EncodingSpec(Family.BASIS)

_CATALOG = (
    "RX", "RY",
    "RX-RY", "RX-RZ", "RY-RX", "RY-RZ", "H-RY", "H-RZ",
    "RX-RY-RZ", "RX-RZ-RY", "RY-RX-RZ", "RY-RZ-RX",
    "H-RY-RX", "H-RY-RZ", "H-RZ-RX", "H-RZ-RY",
    "H-RY-RX-RZ", "H-RY-RZ-RX", "H-RZ-RX-RY", "H-RZ-RY-RX",
)


def canonical_order(spec: EncodingSpec) -> tuple[int, str]:
    return (len(spec.gate_tags), spec.name)


def enumerate_angle_strategies() -> list[EncodingSpec]:
    """The twenty pruned angle strategies, by tag count then name."""
    specs = [EncodingSpec.parse(name) for name in _CATALOG]
    return sorted(specs, key=canonical_order)


def default_encodings() -> list[EncodingSpec]:
    return enumerate_angle_strategies() + [AMPLITUDE]


# --------------------------------------------------------------------------
# angle encoding


def angle_encoding_ops(spec: EncodingSpec, features: np.ndarray) -> list[Op]:
    """Tape for an angle strategy; ``features`` has shape ``(batch, n)``.

    Every tag on qubit i uses the same feature x_i, and "A-B" applies A first.
    """
    if spec.family != Family.ANGLE:
        raise ValueError(f"{spec.name} is not an angle strategy")
    features = np.asarray(features, dtype=float)
    ops = []
    for qubit in range(features.shape[1]):
        column = features[:, qubit]
        for tag in spec.gate_tags:
            if tag == HADAMARD_TAG:
                ops.append(Op(GateKind.H, qubit))
            else:
                ops.append(Op(GateKind(tag), qubit, angle=column))
    return ops


def apply_angle_encoding(state: StateVector, spec: EncodingSpec, features: Sequence[float]) -> StateVector:
    features = np.asarray(features, dtype=float).reshape(1, -1)
    if features.shape[1] != state.num_qubits:
        raise ValueError(
            f"{features.shape[1]} features for {state.num_qubits} qubit(s)"
        )
    psi = state.batch()
    run_ops(psi, state.num_qubits, angle_encoding_ops(spec, features))
    return StateVector(state.num_qubits, psi[0])


# --------------------------------------------------------------------------
# amplitude encoding


def next_power_of_two(n: int) -> int:
    return 1 if n <= 1 else 1 << (int(n) - 1).bit_length()


def amplitude_normalize(raw: Sequence[float]) -> np.ndarray:
    """Zero-pad to a power-of-two length and scale to unit L2 norm."""
    return amplitude_normalize_rows(np.asarray(raw, dtype=float).reshape(1, -1))[0]


def amplitude_normalize_rows(rows: np.ndarray) -> np.ndarray:
    rows = np.asarray(rows, dtype=float)
    width = next_power_of_two(rows.shape[1])
    padded = np.zeros((rows.shape[0], width))
    padded[:, : rows.shape[1]] = rows
    norms = np.linalg.norm(padded, axis=1)
    if np.any(norms == 0):
        bad = int(np.flatnonzero(norms == 0)[0])
        raise ValueError(f"row {bad} is all zeros; amplitude encoding is undefined")
    return padded / norms[:, None]


def _gray(i: int) -> int:
    return i ^ (i >> 1)


def _pattern_controls(level: int, pattern: int) -> tuple[tuple[int, int], ...]:
    # qubit 0 is the most significant bit of the prefix pattern
    return tuple((q, (pattern >> (level - 1 - q)) & 1) for q in range(level))


def _uniformly_controlled(kind: GateKind, level: int, angles: np.ndarray, decompose: bool) -> list[Op]:
    """Rotation on qubit ``level`` multiplexed by the prefix qubits 0..level-1.

    ``angles`` has shape ``(batch, 2**level)``: column j is the angle used when
    the prefix qubits spell j. ``decompose`` selects the CNOT + single-qubit
    rotation form built on a Gray-code walk over the prefix patterns.
    """
    count = 1 << level
    if level == 0:
        return [Op(kind, 0, angle=angles[:, 0])]
    if not decompose:
        return [
            Op(kind, level, _pattern_controls(level, j), angle=angles[:, j])
            for j in range(count)
        ]
    walsh = np.array(
        [[(-1) ** bin(j & _gray(i)).count("1") for j in range(count)] for i in range(count)],
        dtype=float,
    )
    thetas = angles @ walsh.T / count
    ops = []
    for i in range(count):
        ops.append(Op(kind, level, angle=thetas[:, i]))
        flipped = _gray(i) ^ _gray((i + 1) % count)
        bit = flipped.bit_length() - 1
        ops.append(cnot(level - 1 - bit, level))
    return ops


def mottonen_angles(targets: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray] | None]:
    """RY (and, for complex input, RZ) angle tables per qubit level.

    For real targets the last level uses the signed pair, so negative
    amplitudes are produced by the RY rotations alone.
    """
    targets = np.asarray(targets)
    batch, dim = targets.shape
    n = dim.bit_length() - 1
    is_complex = np.iscomplexobj(targets) and np.any(np.abs(targets.imag) > 0)
    mags = np.abs(targets) if is_complex else targets.real.astype(float)
    ry = []
    for level in range(n):
        block = mags.reshape(batch, 1 << level, 2, dim >> (level + 1))
        if level == n - 1:
            left, right = block[:, :, 0, 0], block[:, :, 1, 0]
        else:
            left = np.sqrt(np.sum(block[:, :, 0, :] ** 2, axis=-1))
            right = np.sqrt(np.sum(block[:, :, 1, :] ** 2, axis=-1))
        ry.append(2.0 * np.arctan2(right, left))
    if not is_complex:
        return ry, None
    omega = np.angle(targets)
    rz = []
    for level in range(n):
        block = omega.reshape(batch, 1 << level, 2, dim >> (level + 1))
        rz.append(block[:, :, 1, :].mean(axis=-1) - block[:, :, 0, :].mean(axis=-1))
    return ry, rz


def mottonen_ops(targets: np.ndarray, decompose: bool = False) -> list[Op]:
    """Batched Mottonen tape for unit vectors of shape ``(batch, 2**n)``."""
    targets = np.atleast_2d(targets)
    _check_prep_targets(targets)
    ry, rz = mottonen_angles(targets)
    ops = []
    for level, angles in enumerate(ry):
        ops.extend(_uniformly_controlled(GateKind.RY, level, angles, decompose))
    if rz is not None:
        for level, angles in enumerate(rz):
            ops.extend(_uniformly_controlled(GateKind.RZ, level, angles, decompose))
    return ops


def _check_prep_targets(targets: np.ndarray) -> None:
    dim = targets.shape[1]
    if dim < 2 or dim & (dim - 1):
        raise ValueError(f"target length {dim} is not a power of two >= 2")
    norms = np.linalg.norm(targets, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise ValueError("Mottonen targets must have unit L2 norm")


def mottonen_prepare(target: Sequence[complex], num_qubits: int, decompose: bool = False) -> list[Op]:
    """Gate sequence preparing ``target`` from |0...0>.

    Without ``decompose`` each uniformly controlled rotation is written as
    2**k rotations with positive and negative controls on the preceding
    qubits. Angles in the returned ops are plain floats.
    """
    target = np.asarray(target).reshape(1, -1)
    if target.shape[1] != 1 << num_qubits:
        raise ValueError(f"target length {target.shape[1]} != 2**{num_qubits}")
    ops = mottonen_ops(target, decompose=decompose)
    for op in ops:
        if op.angle is not None:
            op.angle = float(op.angle[0])
    return ops


# --------------------------------------------------------------------------
# basis encoding


def basis_qubit_count(num_feature_bits: int, num_items: int) -> int:
    return num_feature_bits + max(1, int(np.log2(num_items)))


def basis_encode(items: Sequence[tuple[int, int]], num_feature_bits: int) -> StateVector:
    """Equal superposition of |x_i>|i> with the feature register first."""
    count = len(items)
    if count == 0 or count & (count - 1):
        raise ValueError(f"number of items {count} is not a power of two")
    index_bits = basis_qubit_count(num_feature_bits, count) - num_feature_bits
    n = num_feature_bits + index_bits
    amps = np.zeros(1 << n, dtype=complex)
    for feature, index in items:
        if not 0 <= feature < 1 << num_feature_bits:
            raise ValueError(f"feature {feature} does not fit in {num_feature_bits} bit(s)")
        if not 0 <= index < 1 << index_bits:
            raise ValueError(f"index {index} does not fit in {index_bits} bit(s)")
        slot = (feature << index_bits) | index
        if amps[slot] != 0:
            raise ValueError(f"duplicate basis state for item ({feature}, {index})")
        amps[slot] = 1.0 / np.sqrt(count)
    return StateVector(n, amps)


# --------------------------------------------------------------------------
# equivalence pruning


def _single_qubit_states(spec: EncodingSpec, angles: np.ndarray) -> np.ndarray:
    psi = zero_batch(1, len(angles))
    return run_ops(psi, 1, angle_encoding_ops(spec, angles.reshape(-1, 1)))


def _require_angle(*specs: EncodingSpec) -> None:
    for spec in specs:
        if spec.family != Family.ANGLE:
            raise ValueError(f"{spec.name} is not an angle strategy")


def equivalence_grid(samples: int) -> np.ndarray:
    return np.linspace(0.0, np.pi, samples)


def strategies_equivalent(a: EncodingSpec, b: EncodingSpec, samples: int = 16, tol: float = 1e-9) -> bool:
    """True if a(x)|0> and b(x)|0> agree up to global phase on the grid."""
    _require_angle(a, b)
    grid = equivalence_grid(samples)
    sa = _single_qubit_states(a, grid)
    sb = _single_qubit_states(b, grid)
    overlap = np.abs(np.sum(np.conj(sa) * sb, axis=1)) ** 2
    return bool(np.all(overlap >= 1.0 - tol))


def feature_independent(spec: EncodingSpec, samples: int = 16, tol: float = 1e-9) -> bool:
    """True if the encoded state is the same (up to phase) for every grid angle."""
    _require_angle(spec)
    states = _single_qubit_states(spec, equivalence_grid(samples))
    overlap = np.abs(states @ np.conj(states[0])) ** 2
    return bool(np.all(overlap >= 1.0 - tol))


def permutation_universe() -> list[EncodingSpec]:
    """Every H-optional sequence of at most three distinct rotations."""
    specs = [EncodingSpec(Family.ANGLE, (HADAMARD_TAG,))]
    for size in range(1, 4):
        for perm in itertools.permutations(ROTATION_TAGS, size):
            specs.append(EncodingSpec(Family.ANGLE, perm))
            specs.append(EncodingSpec(Family.ANGLE, (HADAMARD_TAG,) + perm))
    return sorted(specs, key=canonical_order)


def dedup_strategies(raw: Iterable[EncodingSpec], samples: int = 16, tol: float = 1e-9) -> list[EncodingSpec]:
    """Keep the first spec of each equivalence class, in canonical order.

    Strategies whose output does not depend on the feature at all carry no
    data and are dropped together with their whole class.
    """
    ordered = sorted(set(raw), key=canonical_order)
    _require_angle(*ordered)
    kept: list[EncodingSpec] = []
    for spec in ordered:
        if feature_independent(spec, samples, tol):
            continue
        if any(strategies_equivalent(spec, k, samples, tol) for k in kept):
            continue
        kept.append(spec)
    return kept


# --------------------------------------------------------------------------
# Bloch trajectories


@dataclass(frozen=True)
class BlochSample:
    angle: float
    x: float
    y: float
    z: float


def bloch_trajectory(spec: EncodingSpec, num_points: int) -> list[BlochSample]:
    _require_angle(spec)
    if num_points < 2:
        raise ValueError("a trajectory needs at least two points")
    angles = np.linspace(-np.pi / 2, np.pi / 2, num_points)
    states = _single_qubit_states(spec, angles)
    samples = []
    for angle, amps in zip(angles, states):
        x, y, z = bloch_vector(StateVector(1, amps))
        samples.append(BlochSample(float(angle), x, y, z))
    return samples


def trajectory_csv(trajectories: dict[str, list[BlochSample]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["strategy", "angle", "x", "y", "z"])
    for name, samples in trajectories.items():
        for s in samples:
            writer.writerow([name, f"{s.angle:.9f}", f"{s.x:.9f}", f"{s.y:.9f}", f"{s.z:.9f}"])
    return buf.getvalue()


def write_trajectory_csv(path: str | os.PathLike, trajectories: dict[str, list[BlochSample]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(trajectory_csv(trajectories))
