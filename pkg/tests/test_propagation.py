import numpy as np
import pytest
from helpers import dense_unitary, pauli_matrix, random_circuit
from hypothesis import given, settings
from hypothesis import strategies as st

from qcut.circuit import Gate, GateKind
from qcut.pauli import encode
from qcut.propagation import (
    PauliBatch,
    apply_gate,
    init_weights,
    input_marginals,
    propagate,
    surrogate_angle,
    with_surrogate_angles,
)


def _as_dict(batch):
    return {(int(s), int(c)): float(v) for s, c, v in zip(batch.sources, batch.codes, batch.coeffs)}


def test_cnot_forward_xz():
    out = apply_gate(PauliBatch.from_codes(2, [encode("XZ")]), Gate(GateKind.CNOT, (0, 1)))
    assert _as_dict(out) == {(0, encode("YY")): -1.0}


def test_t_branches_and_merges():
    t = Gate(GateKind.T, (0,))
    out = propagate(PauliBatch.from_codes(1, [encode("X")]), [t, Gate(GateKind.TDG, (0,))])
    assert _as_dict(out) == pytest.approx({(0, encode("X")): 1.0})


def test_backward_is_transpose():
    g = Gate(GateKind.RY, (0,), 0.4)
    fwd = propagate(PauliBatch.from_codes(1, [encode("Z")]), [g])
    back = propagate(PauliBatch.from_codes(1, [encode("Z")]), [g], backward=True)
    f, b = _as_dict(fwd), _as_dict(back)
    assert f[(0, encode("Z"))] == pytest.approx(b[(0, encode("Z"))])
    assert f[(0, encode("X"))] == pytest.approx(-b[(0, encode("X"))])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_matches_dense_conjugation(seed, n):
    rng = np.random.default_rng(seed)
    c = random_circuit(rng, n, 12)
    code = int(rng.integers(4**n))
    label = "".join("IXYZ"[(code >> (2 * (n - 1 - q))) & 3] for q in range(n))
    u = dense_unitary(c)
    want = u @ pauli_matrix(label) @ u.conj().T
    got = np.zeros_like(want)
    for (_, out), v in _as_dict(propagate(PauliBatch.from_codes(n, [code]), c.gates)).items():
        lab = "".join("IXYZ"[(out >> (2 * (n - 1 - q))) & 3] for q in range(n))
        got += v * pauli_matrix(lab)
    assert np.allclose(got, want, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_clifford_steps_conserve_norm(seed):
    rng = np.random.default_rng(seed)
    kinds = [GateKind.H, GateKind.S, GateKind.CNOT, GateKind.CZ, GateKind.X, GateKind.SDG]
    gates = []
    for _ in range(15):
        k = kinds[int(rng.integers(len(kinds)))]
        gates.append(Gate(k, (0, 1) if k.num_qubits == 2 else (int(rng.integers(2)),)))
    batch = PauliBatch.from_codes(2, [1, 6, 11], [0.3, -0.5, 0.8])
    out = propagate(batch, gates)
    assert len(out) == 3
    assert np.sum(out.coeffs**2) == pytest.approx(np.sum(batch.coeffs**2))


def test_depolarizing_scales_non_identity():
    g = Gate(GateKind.H, (0,))
    out = propagate(PauliBatch.from_codes(1, [encode("Z"), encode("I")]), [g], noise=0.1)
    assert _as_dict(out) == pytest.approx({(0, encode("X")): 0.9, (1, encode("I")): 1.0})


def test_input_marginals_drop_xy_on_fresh():
    batch = PauliBatch(2, np.array([0, 0, 0]), np.array([encode("XZ"), encode("XX"), encode("YI")]), np.array([1.0, 2.0, 3.0]))
    h = input_marginals(batch, 1, inputs=[0], fresh=[1])
    assert h.shape == (1, 4)
    assert list(h[0]) == [0.0, 1.0, 3.0, 0.0]


def test_init_weights():
    assert list(init_weights(["plus"])) == [1, 1, 0, 0]
    assert list(init_weights(["one", "i"])) == list(np.kron([1, 0, 0, -1], [1, 0, 1, 0]))


def test_surrogates_only_replace_non_clifford_rotations():
    gates = [Gate(GateKind.RZ, (0,), 0.0), Gate(GateKind.RX, (0,), 1.1), Gate(GateKind.T, (0,)), Gate(GateKind.RY, (0,), np.pi)]
    out = with_surrogate_angles(gates)
    assert out[0] == gates[0] and out[2] == gates[2] and out[3] == gates[3]
    assert out[1].theta == surrogate_angle(1)
    angles = [surrogate_angle(k) for k in range(200)]
    assert len(set(angles)) == 200
    assert min(angles) >= 0.3 and max(angles) <= 1.2
