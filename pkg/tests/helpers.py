"""Shared test utilities, including a second, deliberately naive simulator."""

from __future__ import annotations

import math
from functools import reduce

import numpy as np

from qcut.circuit import Circuit, Gate, GateKind
from qcut.cutting import CutPlan, CutPoint, PlanError, apply_manual_cuts

SQ2 = math.sqrt(2)
PAULIS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_P0 = np.array([[1, 0], [0, 0]], dtype=complex)
_P1 = np.array([[0, 0], [0, 1]], dtype=complex)


def _single(kind: GateKind, theta):
    c = math.cos(theta / 2) if theta is not None else 0
    s = math.sin(theta / 2) if theta is not None else 0
    return {
        GateKind.I: np.eye(2),
        GateKind.X: PAULIS["X"],
        GateKind.Y: PAULIS["Y"],
        GateKind.Z: PAULIS["Z"],
        GateKind.H: np.array([[1, 1], [1, -1]]) / SQ2,
        GateKind.S: np.diag([1, 1j]),
        GateKind.SDG: np.diag([1, -1j]),
        GateKind.T: np.diag([1, np.exp(1j * np.pi / 4)]),
        GateKind.TDG: np.diag([1, np.exp(-1j * np.pi / 4)]),
        GateKind.RX: np.array([[c, -1j * s], [-1j * s, c]]),
        GateKind.RY: np.array([[c, -s], [s, c]]),
        GateKind.RZ: np.diag([np.exp(-1j * theta / 2), np.exp(1j * theta / 2)]) if theta is not None else None,
    }[kind]


def _kron_all(mats):
    return reduce(np.kron, mats, np.eye(1, dtype=complex))


def dense_gate(gate: Gate, n: int) -> np.ndarray:
    """Full 2^n matrix of ``gate`` built from Kronecker products (qubit 0 leftmost)."""
    if len(gate.qubits) == 1:
        mats = [np.eye(2)] * n
        mats[gate.qubits[0]] = _single(gate.kind, gate.theta)
        return _kron_all(mats)
    a, b = gate.qubits
    second = PAULIS["X"] if gate.kind is GateKind.CNOT else PAULIS["Z"]
    idle = [np.eye(2)] * n
    hit = list(idle)
    idle = list(idle)
    idle[a] = _P0
    hit[a] = _P1
    hit[b] = second
    return _kron_all(idle) + _kron_all(hit)


def dense_unitary(circuit: Circuit) -> np.ndarray:
    u = np.eye(2**circuit.num_qubits, dtype=complex)
    for g in circuit.gates:
        u = dense_gate(g, circuit.num_qubits) @ u
    return u


def dense_state(circuit: Circuit) -> np.ndarray:
    return dense_unitary(circuit)[:, 0]


def pauli_matrix(label: str) -> np.ndarray:
    return _kron_all([PAULIS[c] for c in label])


def dense_expectation(circuit: Circuit, label: str) -> float:
    psi = dense_state(circuit)
    return float(np.real(psi.conj() @ pauli_matrix(label) @ psi))


def dense_factor(sub) -> dict[str, float]:
    """Full factor of a subcircuit by explicit operator evolution.

    Keys list letters in factor dim order (inputs, cut outputs, terminals).
    """
    w = sub.width
    u = dense_unitary(sub.as_circuit()) if sub.gates else np.eye(2**w)
    inputs = [q for q, _ in sub.input_edges]
    outputs = [q for q, _ in sub.output_edges] + sub.terminal_qubits
    out = {}
    for a in _labels(len(inputs)):
        ops = [_P0] * w
        for q, letter in zip(inputs, a):
            ops[q] = PAULIS[letter]
        evolved = u @ _kron_all(ops) @ u.conj().T
        for b in _labels(len(outputs)):
            local = ["I"] * w
            for q, letter in zip(outputs, b):
                local[q] = letter
            v = np.real(np.trace(evolved @ pauli_matrix("".join(local)))) / 2 ** len(outputs)
            if abs(v) > 1e-12:
                out[a + b] = float(v)
    return out


def _labels(k: int):
    if k == 0:
        yield ""
        return
    for head in "IXYZ":
        for tail in _labels(k - 1):
            yield head + tail


# ---------------------------------------------------------------- random workloads

_ONE_Q = ["h", "s", "sdg", "t", "tdg", "x", "y", "z", "rx", "ry", "rz"]


def random_circuit(rng: np.random.Generator, n: int, num_gates: int, two_q_frac: float = 0.4) -> Circuit:
    gates = []
    for _ in range(num_gates):
        if rng.random() < two_q_frac and n > 1:
            a = int(rng.integers(n))
            b = int((a + rng.integers(1, min(n, 3))) % n)
            kind = GateKind.CNOT if rng.random() < 0.5 else GateKind.CZ
            gates.append(Gate(kind, (a, b)))
        else:
            kind = GateKind(_ONE_Q[int(rng.integers(len(_ONE_Q)))])
            theta = float(rng.uniform(-np.pi, np.pi)) if kind.is_rotation else None
            gates.append(Gate(kind, (int(rng.integers(n)),), theta))
    return Circuit(n, tuple(gates), "random")


def random_cut_plan(rng: np.random.Generator, n: int, num_gates: int, max_cuts: int = 4) -> CutPlan:
    """Random circuit with 1..max_cuts random acyclic wire cuts after two-qubit gates."""
    while True:
        circuit = random_circuit(rng, n, num_gates)
        candidates = []
        for pos, g in enumerate(circuit.gates):
            if len(g.qubits) == 2:
                candidates.extend((q, pos) for q in g.qubits)
        if not candidates:
            continue
        for _ in range(20):
            k = int(rng.integers(1, max_cuts + 1))
            picks = rng.choice(len(candidates), size=min(k, len(candidates)), replace=False)
            cuts = [CutPoint(*candidates[i]) for i in picks]
            try:
                plan = apply_manual_cuts(circuit, cuts)
            except PlanError:
                continue
            if len(plan.subcircuits) > 1:
                return plan


def random_pauli(rng: np.random.Generator, n: int) -> str:
    return "".join(rng.choice(list("IXYZ"), size=n))
