"""Vectorised propagation of batches of Pauli sums through a gate list.

A batch holds terms ``(source, code, coefficient)``; ``source`` tags which
starting operator a term descends from so many operators can share one pass.
Forward propagation applies P -> U P U^dagger (Schroedinger picture), backward
propagation applies P -> U^dagger P U (Heisenberg picture).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .circuit import Gate
from .pauli import gate_ptm, is_clifford

# coefficients below this are dropped mid-propagation; final emission uses ZERO_TOL
DROP_TOL = 1e-15

# product states used for initialisation: value of <s|P|s> for P in I, X, Y, Z
INIT_STATES = ("zero", "one", "plus", "i")
INIT_EXPECTATIONS = np.array(
    [
        [1.0, 0.0, 0.0, 1.0],
        [1.0, 0.0, 0.0, -1.0],
        [1.0, 1.0, 0.0, 0.0],
        [1.0, 0.0, 1.0, 0.0],
    ]
)
_MAX_KEY_BITS = 62


@dataclass
class PauliBatch:
    width: int
    sources: np.ndarray
    codes: np.ndarray
    coeffs: np.ndarray

    @classmethod
    def from_codes(cls, width: int, codes, coeffs=None) -> PauliBatch:
        codes = np.asarray(codes, dtype=np.int64)
        if coeffs is None:
            coeffs = np.ones(len(codes))
        return cls(width, np.arange(len(codes), dtype=np.int64), codes, np.asarray(coeffs, dtype=float))

    def __len__(self) -> int:
        return len(self.codes)

    def letters(self, qubit: int) -> np.ndarray:
        return (self.codes >> (2 * (self.width - 1 - qubit))) & 3

    def merge(self) -> PauliBatch:
        """Sum duplicate (source, code) terms and drop negligible ones."""
        if len(self.codes) == 0:
            return self
        code_bits = 2 * self.width
        src_bits = max(int(self.sources.max()).bit_length(), 1)
        if code_bits + src_bits <= _MAX_KEY_BITS:
            keys = (self.sources << code_bits) | self.codes
            uniq, inv = np.unique(keys, return_inverse=True)
            sources, codes = uniq >> code_bits, uniq & ((1 << code_bits) - 1)
        else:
            pairs = np.stack([self.sources, self.codes], axis=1)
            uniq, inv = np.unique(pairs, axis=0, return_inverse=True)
            sources, codes = uniq[:, 0], uniq[:, 1]
        coeffs = np.bincount(inv.reshape(-1), weights=self.coeffs, minlength=len(uniq))
        keep = np.abs(coeffs) > DROP_TOL
        return PauliBatch(self.width, sources[keep], codes[keep], coeffs[keep])

    def damp(self, qubits, factor: float) -> None:
        """Scale every term by ``factor`` per non-identity letter on ``qubits``."""
        for q in qubits:
            self.coeffs = np.where(self.letters(q) != 0, self.coeffs * factor, self.coeffs)


@lru_cache(maxsize=4096)
def _transfer(gate: Gate, backward: bool) -> tuple[np.ndarray, bool]:
    m = gate_ptm(gate).matrix()
    if backward:
        m = m.T
    perm = bool(np.all(np.count_nonzero(m, axis=1) == 1))
    return m, perm


def apply_gate(batch: PauliBatch, gate: Gate, backward: bool = False) -> PauliBatch:
    mat, is_perm = _transfer(gate, backward)
    shifts = [2 * (batch.width - 1 - q) for q in gate.qubits]
    local = np.zeros_like(batch.codes)
    clear = 0
    for s in shifts:
        local = (local << 2) | ((batch.codes >> s) & 3)
        clear |= 3 << s
    cleared = batch.codes & ~np.int64(clear)

    def spread(values):
        out = np.zeros_like(values)
        for i, s in enumerate(shifts):
            digit = (values >> (2 * (len(shifts) - 1 - i))) & 3
            out |= digit << s
        return out

    if is_perm:
        target = np.argmax(mat != 0, axis=1)
        sign = mat[np.arange(len(mat)), target]
        new_local = target[local]
        return PauliBatch(batch.width, batch.sources, cleared | spread(new_local), batch.coeffs * sign[local])

    srcs, codes, coeffs = [], [], []
    for p in range(len(mat)):
        sel = np.flatnonzero(local == p)
        if len(sel) == 0:
            continue
        for q in np.flatnonzero(mat[p]):
            srcs.append(batch.sources[sel])
            codes.append(cleared[sel] | spread(np.full(len(sel), q, dtype=np.int64)))
            coeffs.append(batch.coeffs[sel] * mat[p, q])
    if not srcs:
        return PauliBatch(batch.width, batch.sources[:0], batch.codes[:0], batch.coeffs[:0])
    out = PauliBatch(batch.width, np.concatenate(srcs), np.concatenate(codes), np.concatenate(coeffs))
    return out.merge()


def surrogate_angle(index: int) -> float:
    """Deterministic generic angle, bounded away from multiples of pi/2."""
    return 0.3 + ((index * 0.6180339887498949) % 1.0) * 0.9


def with_surrogate_angles(gates) -> list[Gate]:
    """Replace every non-Clifford rotation angle by a distinct generic angle.

    The resulting support only reflects which branches are structurally
    non-zero, independent of the actual parameter values.
    """
    out = []
    for k, g in enumerate(gates):
        if g.kind.is_rotation and not is_clifford(g):
            g = Gate(g.kind, g.qubits, surrogate_angle(k))
        out.append(g)
    return out


def propagate(batch: PauliBatch, gates, backward: bool = False, noise: float = 0.0) -> PauliBatch:
    """Push ``batch`` through ``gates``; ``noise`` is a per-gate depolarizing strength.

    Each gate is followed by single-qubit depolarizing of strength ``noise`` on
    its qubits. Depolarizing is self-adjoint, so in either direction it scales
    non-identity letters by ``1 - noise``.
    """
    damping = 1.0 - noise
    seq = list(gates)
    if backward:
        seq.reverse()
    for g in seq:
        if backward:
            if noise:
                batch.damp(g.qubits, damping)
            batch = apply_gate(batch, g, backward=True)
        else:
            batch = apply_gate(batch, g)
            if noise:
                batch.damp(g.qubits, damping)
    if noise:
        batch = batch.merge()
    return batch


def input_marginals(batch: PauliBatch, num_sources: int, inputs, fresh) -> np.ndarray:
    """Sum coefficients per (source, input letters), keeping terms that survive |0> on ``fresh``.

    Returns an array of shape ``(num_sources, 4 ** len(inputs))``. Terms carrying X
    or Y on a fresh qubit vanish against |0><0|.
    """
    ok = np.ones(len(batch), dtype=bool)
    for q in fresh:
        letter = batch.letters(q)
        ok &= (letter == 0) | (letter == 3)
    idx = np.zeros(len(batch), dtype=np.int64)
    for q in inputs:
        idx = (idx << 2) | batch.letters(q)
    size = 4 ** len(inputs)
    flat = np.bincount(
        (batch.sources[ok] * size + idx[ok]).astype(np.int64),
        weights=batch.coeffs[ok],
        minlength=num_sources * size,
    )
    return flat.reshape(num_sources, size)


def init_weights(init_labels) -> np.ndarray:
    """Row vector over input letter tuples giving prod_i <s_i|P_i|s_i> for the product state."""
    w = np.ones(1)
    for label in init_labels:
        w = np.kron(w, INIT_EXPECTATIONS[INIT_STATES.index(label)])
    return w

