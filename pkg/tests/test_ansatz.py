import numpy as np
import pytest

from vqcbench.ansatz import (
    ModelConfig,
    ansatz_ops,
    build_and_run,
    encoding_ops,
    entangler_range,
    layer_ops,
    model_ops,
    param_count,
    run_model,
    strongly_entangling_layers,
)
from vqcbench.circuit import run_on_state
from vqcbench.encoding import AMPLITUDE, BASIS, EncodingSpec, apply_angle_encoding, mottonen_prepare
from vqcbench.sim import GateKind, StateVector, fidelity, new_zero_state

from conftest import random_real_unit, random_state

RY = EncodingSpec.parse("RY")


def cnot_pairs(ops):
    return [(op.controls[0][0], op.target) for op in ops if op.kind == GateKind.X]


def test_param_count():
    assert param_count(ModelConfig(RY, 4, 10)) == 120
    assert param_count(ModelConfig(RY, 3, 2)) == 18
    assert param_count(ModelConfig(RY, 1, 1)) == 3


def test_entangler_schedule():
    assert set(cnot_pairs(layer_ops(0, 2))) == {(0, 1), (1, 0)}
    assert [entangler_range(l, 4) for l in range(2)] == [1, 2]
    assert cnot_pairs(layer_ops(1, 4)) == [(0, 2), (1, 3), (2, 0), (3, 1)]
    assert cnot_pairs(layer_ops(0, 1)) == []


def test_zero_params_identity():
    out = strongly_entangling_layers(new_zero_state(3), np.zeros((2, 3, 3)))
    assert fidelity(out, new_zero_state(3)) == pytest.approx(1.0)


def test_shape_errors():
    with pytest.raises(ValueError):
        strongly_entangling_layers(new_zero_state(2), np.zeros((1, 3, 3)))
    cfg = ModelConfig(RY, 2, 1)
    with pytest.raises(ValueError):
        build_and_run(cfg, np.zeros(2), np.zeros((2, 2, 3)))
    with pytest.raises(ValueError):
        build_and_run(cfg, np.zeros(3), np.zeros((1, 2, 3)))
    with pytest.raises(ValueError):
        build_and_run(cfg, np.zeros(2), np.full((1, 2, 3), np.nan))


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(RY, 2, 3, reuploading=True)
    with pytest.raises(ValueError):
        ModelConfig(RY, 2, 2, num_classes=3)
    with pytest.raises(ValueError):
        ModelConfig(BASIS, 2, 2)
    ModelConfig(RY, 3, 2, num_classes=3)


def test_gate_stream_layout():
    x = np.array([[0.3, 0.4]])
    embed = encoding_ops(ModelConfig(RY, 2, 2), x)
    plain = model_ops(ModelConfig(RY, 2, 2), x)
    assert len(plain) == len(embed) + len(ansatz_ops(2, 2))
    ru = model_ops(ModelConfig(RY, 2, 4, reuploading=True), x)
    block = len(embed) + len(ansatz_ops(2, 2))
    assert len(ru) == 2 * block
    assert [op.kind for op in ru[:len(embed)]] == [op.kind for op in ru[block:block + len(embed)]]
    params_in_second = [op.param for op in ru[block + len(embed):] if op.trainable]
    assert params_in_second == [(2 * 2 + q) * 3 for q in range(2)] + [(3 * 2 + q) * 3 for q in range(2)]


def _oracle_rot(phi, theta, gamma):
    rz = lambda a: np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])
    ry = np.array([[np.cos(theta / 2), -np.sin(theta / 2)], [np.sin(theta / 2), np.cos(theta / 2)]])
    return rz(phi) @ ry @ rz(gamma)


def _oracle_layers(psi, params):
    """Dense-matrix construction of the ansatz, independent of the tape."""
    L, n, _ = params.shape
    dim = 1 << n
    for l in range(L):
        u = np.array([[1.0 + 0j]])
        for q in range(n):
            u = np.kron(u, _oracle_rot(*params[l, q]))
        psi = u @ psi
        if n > 1:
            r = l % (n - 1) + 1
            for c in range(n):
                t = (c + r) % n
                perm = np.arange(dim)
                cbit, tbit = 1 << (n - 1 - c), 1 << (n - 1 - t)
                flip = (perm & cbit) != 0
                perm[flip] ^= tbit
                new = np.zeros_like(psi)
                new[perm] = psi
                psi = new
    return psi


def test_layers_match_dense_oracle(rng):
    for n in (1, 2, 3, 4):
        params = rng.uniform(0, 2 * np.pi, (3, n, 3))
        psi = random_state(rng, n)
        out = strongly_entangling_layers(StateVector(n, psi), params)
        assert np.abs(out.amplitudes - _oracle_layers(psi, params)).max() < 1e-12


def test_build_and_run_composition(rng):
    for n in (2, 3):
        params = rng.uniform(0, 2 * np.pi, (2, n, 3))
        x = rng.uniform(0, np.pi, n)
        direct = build_and_run(ModelConfig(EncodingSpec.parse("H-RY-RZ"), n, 2), x, params)
        seq = strongly_entangling_layers(apply_angle_encoding(new_zero_state(n), EncodingSpec.parse("H-RY-RZ"), x), params)
        assert np.abs(direct.amplitudes - seq.amplitudes).max() < 1e-12
        a = random_real_unit(rng, 1 << n)
        direct = build_and_run(ModelConfig(AMPLITUDE, n, 2), a, params)
        prep = run_on_state(new_zero_state(n), mottonen_prepare(a, n))
        seq = strongly_entangling_layers(prep, params)
        assert np.abs(direct.amplitudes - seq.amplitudes).max() < 1e-12


def test_reuploading_composition(rng):
    n = 2
    params = rng.uniform(0, 2 * np.pi, (4, n, 3))
    x = rng.uniform(0, np.pi, n)
    out = build_and_run(ModelConfig(RY, n, 4, reuploading=True), x, params)
    s = apply_angle_encoding(new_zero_state(n), RY, x)
    s = run_on_state(s, ansatz_ops(n, range(0, 2)), params.reshape(-1))
    s = apply_angle_encoding(s, RY, x)
    s = run_on_state(s, ansatz_ops(n, range(2, 4)), params.reshape(-1))
    assert np.abs(out.amplitudes - s.amplitudes).max() < 1e-12


def test_norm_random_configs(rng):
    names = ["RX", "H-RZ-RY", "Amplitude"]
    for _ in range(20):
        n = int(rng.integers(1, 5))
        L = int(rng.integers(1, 6)) * 2
        name = names[rng.integers(3)]
        spec = EncodingSpec.parse(name)
        cfg = ModelConfig(spec, n, L, reuploading=bool(rng.integers(2)))
        x = random_real_unit(rng, cfg.feature_width) if name == "Amplitude" else rng.uniform(0, np.pi, n)
        out = build_and_run(cfg, x, rng.uniform(0, 2 * np.pi, (L, n, 3)))
        assert abs(np.linalg.norm(out.amplitudes) - 1) < 1e-10


def test_batched_run_matches_single(rng):
    cfg = ModelConfig(AMPLITUDE, 3, 2, reuploading=True)
    x = np.array([random_real_unit(rng, 8) for _ in range(5)])
    params = rng.uniform(0, 2 * np.pi, (2, 3, 3))
    batch = run_model(cfg, x, params)
    for i in range(5):
        assert np.allclose(batch[i], build_and_run(cfg, x[i], params).amplitudes, atol=1e-13)
