"""Pauli strings, gate Pauli transfer maps and density-matrix Pauli coefficients.

Letters are coded I=0, X=1, Y=2, Z=3. A Pauli string over ``w`` qubits packs
two bits per qubit with qubit 0 in the most significant position, so the packed
integer doubles as a base-4 index into factor tensors.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import cache

import numpy as np

from .circuit import Gate, GateKind

ZERO_TOL = 1e-12
LETTERS = "IXYZ"
_LETTER_CODE = {c: i for i, c in enumerate(LETTERS)}

PAULI_MATRICES = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


@dataclass(frozen=True, order=True)
class PauliString:
    width: int
    code: int

    def __post_init__(self):
        if self.width < 1:
            raise ValueError("Pauli string needs width >= 1")
        if not 0 <= self.code < 4**self.width:
            raise ValueError(f"code {self.code} out of range for width {self.width}")

    @classmethod
    def from_label(cls, label: str) -> PauliString:
        return cls(len(label), encode(label))

    @property
    def label(self) -> str:
        return decode(self.code, self.width)

    def letter(self, qubit: int) -> int:
        return (self.code >> (2 * (self.width - 1 - qubit))) & 3

    def letters(self) -> tuple[int, ...]:
        return tuple(self.letter(q) for q in range(self.width))

    def matrix(self) -> np.ndarray:
        out = np.ones((1, 1), dtype=complex)
        for q in range(self.width):
            out = np.kron(out, PAULI_MATRICES[self.letter(q)])
        return out

    def __str__(self) -> str:
        return self.label


def encode(label: str) -> int:
    code = 0
    for ch in label:
        try:
            code = (code << 2) | _LETTER_CODE[ch]
        except KeyError:
            raise ValueError(f"not a Pauli letter: {ch!r}") from None
    return code


def decode(code: int, width: int) -> str:
    return "".join(LETTERS[(code >> (2 * (width - 1 - q))) & 3] for q in range(width))


# ---------------------------------------------------------------- unitaries


_FIXED_UNITARIES = {
    GateKind.I: PAULI_MATRICES[0],
    GateKind.X: PAULI_MATRICES[1],
    GateKind.Y: PAULI_MATRICES[2],
    GateKind.Z: PAULI_MATRICES[3],
    GateKind.H: np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2),
    GateKind.S: np.diag([1, 1j]),
    GateKind.SDG: np.diag([1, -1j]),
    GateKind.T: np.diag([1, cmath.exp(1j * math.pi / 4)]),
    GateKind.TDG: np.diag([1, cmath.exp(-1j * math.pi / 4)]),
    # first listed qubit is the high bit: (control, target)
    GateKind.CNOT: np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    GateKind.CZ: np.diag([1, 1, 1, -1]).astype(complex),
}


def gate_unitary(gate: Gate) -> np.ndarray:
    """Matrix of ``gate`` on its own qubits, first listed qubit as the high bit."""
    if gate.kind in _FIXED_UNITARIES:
        return _FIXED_UNITARIES[gate.kind]
    c, s = math.cos(gate.theta / 2), math.sin(gate.theta / 2)
    if gate.kind is GateKind.RX:
        return np.array([[c, -1j * s], [-1j * s, c]])
    if gate.kind is GateKind.RY:
        return np.array([[c, -s], [s, c]], dtype=complex)
    if gate.kind is GateKind.RZ:
        return np.diag([complex(c, -s), complex(c, s)])
    raise ValueError(f"unsupported gate kind {gate.kind}")


# ---------------------------------------------------------------- transfer maps


@dataclass(frozen=True)
class PauliTransferMap:
    """Action P -> U P U^dagger of a gate, row by row over input Paulis.

    ``rows[p]`` lists ``(output Pauli index, coefficient)`` for input index ``p``.
    Two-qubit indices are ``4 * letter(first qubit) + letter(second qubit)``.
    """

    arity: int
    rows: tuple[tuple[tuple[int, float], ...], ...]

    def matrix(self) -> np.ndarray:
        dim = 4**self.arity
        out = np.zeros((dim, dim))
        for p, row in enumerate(self.rows):
            for q, c in row:
                out[p, q] = c
        return out

    def is_signed_permutation(self, tol: float = ZERO_TOL) -> bool:
        return all(len(row) == 1 and abs(abs(row[0][1]) - 1) <= tol for row in self.rows)


def _clean(x: float) -> float:
    if abs(x) <= ZERO_TOL:
        return 0.0
    for exact in (1.0, -1.0):
        if abs(x - exact) <= ZERO_TOL:
            return exact
    return x


def _ptm_from_unitary(u: np.ndarray) -> PauliTransferMap:
    arity = int(round(math.log2(u.shape[0])))
    basis = [PauliString(arity, c).matrix() for c in range(4**arity)]
    norm = 2**arity
    rows = []
    for p in basis:
        image = u @ p @ u.conj().T
        row = []
        for q, pq in enumerate(basis):
            c = _clean(float(np.real(np.trace(image @ pq))) / norm)
            if c != 0.0:
                row.append((q, c))
        rows.append(tuple(row))
    return PauliTransferMap(arity, tuple(rows))


@cache
def _fixed_ptm(kind: GateKind) -> PauliTransferMap:
    return _ptm_from_unitary(_FIXED_UNITARIES[kind])


# For RZ the plane is (X, Y); RX rotates (Y, Z); RY rotates (Z, X).
_ROTATION_PLANE = {GateKind.RZ: (1, 2), GateKind.RX: (2, 3), GateKind.RY: (3, 1)}


def rotation_ptm(kind: GateKind, theta: float) -> PauliTransferMap:
    a, b = _ROTATION_PLANE[kind]
    c, s = _clean(math.cos(theta)), _clean(math.sin(theta))
    rows: list[tuple] = [((0, 1.0),), (), (), ()]
    rows[6 - a - b] = ((6 - a - b, 1.0),)  # the rotation axis itself
    rows[a] = tuple((q, v) for q, v in ((a, c), (b, s)) if v != 0.0)
    rows[b] = tuple((q, v) for q, v in ((a, -s), (b, c)) if v != 0.0)
    return PauliTransferMap(1, tuple(rows))


def gate_ptm(gate: Gate) -> PauliTransferMap:
    if gate.kind.is_rotation:
        return rotation_ptm(gate.kind, gate.theta)
    if gate.kind in _FIXED_UNITARIES:
        return _fixed_ptm(gate.kind)
    raise ValueError(f"unsupported gate kind {gate.kind}")


def is_clifford(gate: Gate, tol: float = 1e-9) -> bool:
    if gate.kind.is_rotation:
        k = gate.theta / (math.pi / 2)
        return abs(k - round(k)) * (math.pi / 2) <= tol
    return gate_ptm(gate).is_signed_permutation(tol)


# ---------------------------------------------------------------- density decomposition


@dataclass(frozen=True)
class PauliCoefficients:
    """Non-zero f(ps) = tr(rho ps) / 2**width, keyed by packed Pauli code."""

    width: int
    entries: dict[int, float]

    def __getitem__(self, label: str) -> float:
        return self.entries.get(encode(label), 0.0)

    def labelled(self) -> dict[str, float]:
        return {decode(k, self.width): v for k, v in sorted(self.entries.items())}


# rows: I, X, Y, Z; columns: rho00, rho01, rho10, rho11 -> tr(rho P)
_TRACE_MAP = np.array(
    [[1, 0, 0, 1], [0, 1, 1, 0], [0, 1j, -1j, 0], [1, 0, 0, -1]],
    dtype=complex,
)


def pauli_traces(amplitudes: np.ndarray) -> np.ndarray:
    """All 4**n values tr(rho ps) for rho = |psi><psi|, indexed by packed code."""
    amplitudes = np.asarray(amplitudes, dtype=complex)
    n = int(round(math.log2(amplitudes.size)))
    rho = np.multiply.outer(amplitudes, amplitudes.conj()).reshape([2] * (2 * n))
    # interleave (row q, column q) so each qubit owns one extent-4 axis
    order = [ax for q in range(n) for ax in (q, n + q)]
    t = rho.transpose(order).reshape([4] * n) if n else rho
    for q in range(n):
        t = np.moveaxis(np.tensordot(_TRACE_MAP, t, axes=([1], [q])), 0, q)
    return t.reshape(-1)


def decompose_density(state, zero_tol: float = ZERO_TOL) -> PauliCoefficients:
    """Pauli coefficients of a pure state (``Statevector`` or amplitude array)."""
    amps = np.asarray(getattr(state, "amplitudes", state), dtype=complex)
    norm = np.linalg.norm(amps)
    if abs(norm - 1) > 1e-12:
        raise ValueError(f"state is not normalised (norm {norm})")
    n = int(round(math.log2(amps.size)))
    traces = pauli_traces(amps) / 2**n
    if np.max(np.abs(traces.imag), initial=0.0) > 1e-10:
        raise AssertionError("Pauli coefficients of a density matrix must be real")
    values = traces.real
    nz = np.flatnonzero(np.abs(values) > zero_tol)
    return PauliCoefficients(n, {int(i): float(values[i]) for i in nz})
