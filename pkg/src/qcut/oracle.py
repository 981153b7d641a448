"""Brute-force statevector simulator used as ground truth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, Gate
from .pauli import PauliString, gate_unitary

MAX_ORACLE_QUBITS = 24


class WidthError(ValueError):
    pass


@dataclass(frozen=True)
class Statevector:
    width: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.amplitudes.shape != (2**self.width,):
            raise ValueError(f"expected {2**self.width} amplitudes, got {self.amplitudes.shape}")

    @classmethod
    def zero(cls, width: int) -> Statevector:
        amps = np.zeros(2**width, dtype=complex)
        amps[0] = 1.0
        return cls(width, amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def apply_gate(amps: np.ndarray, gate: Gate, width: int) -> np.ndarray:
    """Apply ``gate`` to a flat amplitude vector; qubit 0 is the most significant bit."""
    u = gate_unitary(gate)
    k = len(gate.qubits)
    psi = amps.reshape([2] * width)
    psi = np.tensordot(u.reshape([2] * (2 * k)), psi, axes=(list(range(k, 2 * k)), list(gate.qubits)))
    # tensordot puts the gate's output axes first; move them back into place
    psi = np.moveaxis(psi, list(range(k)), list(gate.qubits))
    return psi.reshape(-1)


def simulate(circuit: Circuit, initial: np.ndarray | None = None) -> Statevector:
    if circuit.num_qubits > MAX_ORACLE_QUBITS:
        raise WidthError(f"oracle is capped at {MAX_ORACLE_QUBITS} qubits, circuit has {circuit.num_qubits}")
    if initial is None:
        amps = Statevector.zero(circuit.num_qubits).amplitudes
    else:
        amps = np.asarray(initial, dtype=complex).copy()
    for g in circuit.gates:
        amps = apply_gate(amps, g, circuit.num_qubits)
    return Statevector(circuit.num_qubits, amps)


def apply_pauli(amps: np.ndarray, ps: PauliString) -> np.ndarray:
    psi = amps.reshape([2] * ps.width).copy()
    for q in range(ps.width):
        letter = ps.letter(q)
        if letter == 0:
            continue
        if letter in (1, 2):
            psi = np.flip(psi, axis=q).copy()
        if letter in (2, 3):
            # Z negates |1>; Y = i X Z, so after the flip the minus sign sits on |0>
            idx = [slice(None)] * ps.width
            idx[q] = 1 if letter == 3 else 0
            psi[tuple(idx)] *= -1
        if letter == 2:
            psi *= 1j
    return psi.reshape(-1)


def expectation(state: Statevector, ps: PauliString | str) -> float:
    if isinstance(ps, str):
        ps = PauliString.from_label(ps)
    if ps.width != state.width:
        raise ValueError(f"Pauli string width {ps.width} != state width {state.width}")
    value = np.vdot(state.amplitudes, apply_pauli(state.amplitudes, ps))
    if abs(value.imag) > 1e-10:
        raise AssertionError(f"Pauli expectation has imaginary part {value.imag}")
    return float(value.real)
