"""Support compilation: which factor entries can be non-zero at all.

Clifford gates map a Pauli string to a single signed string, so the only
branching comes from non-Clifford gates. Propagating Pauli fronts with every
non-Clifford rotation replaced by a generic surrogate angle yields the set of
structurally non-zero entries, independent of the actual parameter values.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .cutting import CutPlan, Subcircuit
from .pauli import LETTERS, ZERO_TOL, encode
from .propagation import PauliBatch, input_marginals, propagate, with_surrogate_angles


class SupportError(ValueError):
    pass


@dataclass(frozen=True)
class FactorInterface:
    """How a subcircuit's factor is indexed.

    ``inputs`` and ``outputs`` list ``(local qubit, variable)`` pairs that become
    factor dimensions. ``fixed`` pins terminal qubits to a letter when a single
    observable is queried; those qubits are then not dimensions.
    """

    subcircuit: Subcircuit
    inputs: tuple[tuple[int, str], ...]
    outputs: tuple[tuple[int, str], ...]
    fixed: tuple[tuple[int, int], ...] = ()

    @property
    def dims(self) -> tuple[str, ...]:
        return tuple(v for _, v in self.inputs) + tuple(v for _, v in self.outputs)

    @property
    def width(self) -> int:
        return self.subcircuit.width

    @property
    def fresh(self) -> list[int]:
        return self.subcircuit.fresh_qubits

    @property
    def num_inputs(self) -> int:
        return len(self.inputs)

    @property
    def num_outputs(self) -> int:
        return len(self.outputs)

    def output_code(self, letters) -> int:
        """Local Pauli code with ``letters`` on the output dims and the pinned letters elsewhere."""
        code = 0
        shift = {q: 2 * (self.width - 1 - q) for q in range(self.width)}
        for (q, _), letter in zip(self.outputs, letters):
            code |= letter << shift[q]
        for q, letter in self.fixed:
            code |= letter << shift[q]
        return code

    def scale(self) -> float:
        """Factor value per unit of summed Heisenberg coefficient."""
        return 2.0 ** (self.num_inputs - self.num_outputs)


def factor_interface(sub: Subcircuit, observable: str | None = None) -> FactorInterface:
    """Full interface (terminals are dims) or one restricted to a global Pauli ``observable``."""
    if observable is None:
        outputs = tuple(sub.output_edges) + tuple((q, sub.ends[q]) for q in sub.terminal_qubits)
        return FactorInterface(sub, tuple(sub.input_edges), outputs)
    fixed = tuple((q, LETTERS.index(observable[sub.global_qubit(q)])) for q in sub.terminal_qubits)
    return FactorInterface(sub, tuple(sub.input_edges), tuple(sub.output_edges), fixed)


@dataclass(frozen=True)
class SupportSet:
    dims: tuple[str, ...]
    members: frozenset[tuple[int, ...]]

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, item) -> bool:
        return tuple(item) in self.members

    def letters(self, var: str) -> set[int]:
        i = self.dims.index(var)
        return {m[i] for m in self.members}

    def restrict(self, var: str, allowed) -> SupportSet:
        i = self.dims.index(var)
        return SupportSet(self.dims, frozenset(m for m in self.members if m[i] in allowed))

    def labelled(self) -> list[str]:
        return sorted("".join(LETTERS[x] for x in m) for m in self.members)

    def to_dict(self) -> dict:
        return {"dims": list(self.dims), "members": [list(s) for s in self.labelled()]}

    @classmethod
    def from_dict(cls, data: dict) -> SupportSet:
        return cls(tuple(data["dims"]), frozenset(tuple(encode(c) for c in m) for m in data["members"]))


def _digits(index: int, count: int) -> tuple[int, ...]:
    return tuple((index >> (2 * (count - 1 - i))) & 3 for i in range(count))


def _forward_support(iface: FactorInterface, gates) -> set[tuple[int, ...]]:
    w, n = iface.width, iface.num_inputs
    shift = [2 * (w - 1 - q) for q in range(w)]
    sources, codes = [], []
    for a in range(4**n):
        base = 0
        for (q, _), letter in zip(iface.inputs, _digits(a, n)):
            base |= letter << shift[q]
        # each fresh |0><0| = (I + Z) / 2
        for letters in product((0, 3), repeat=len(iface.fresh)):
            c = base
            for q, letter in zip(iface.fresh, letters):
                c |= letter << shift[q]
            sources.append(a)
            codes.append(c)
    batch = PauliBatch(w, np.array(sources, dtype=np.int64), np.array(codes, dtype=np.int64), np.ones(len(codes)))
    batch = propagate(batch, gates)
    ok = np.ones(len(batch), dtype=bool)
    for q, letter in iface.fixed:
        ok &= batch.letters(q) == letter
    out = np.zeros(len(batch), dtype=np.int64)
    for q, _ in iface.outputs:
        out = (out << 2) | batch.letters(q)
    m = iface.num_outputs
    key = batch.sources[ok] * 4**m + out[ok]
    uniq, inv = np.unique(key, return_inverse=True)
    sums = np.bincount(inv.reshape(-1), weights=batch.coeffs[ok], minlength=len(uniq))
    return {_digits(int(k) // 4**m, n) + _digits(int(k) % 4**m, m) for k, s in zip(uniq, sums) if abs(s) > ZERO_TOL}


def _backward_support(iface: FactorInterface, gates) -> set[tuple[int, ...]]:
    n, m = iface.num_inputs, iface.num_outputs
    codes = [iface.output_code(_digits(b, m)) for b in range(4**m)]
    batch = propagate(PauliBatch.from_codes(iface.width, codes), gates, backward=True)
    h = input_marginals(batch, len(codes), [q for q, _ in iface.inputs], iface.fresh)
    members = set()
    for b, a in zip(*np.nonzero(np.abs(h) > ZERO_TOL)):
        members.add(_digits(int(a), n) + _digits(int(b), m))
    return members


def propagate_support(iface: FactorInterface | Subcircuit, direction: str = "auto") -> SupportSet:
    """Structurally non-zero entries of a subcircuit factor.

    ``forward`` seeds one Pauli front per input assignment (fresh qubits as
    (I+Z)/2) and reads output letters off the final front; ``backward`` pulls each
    output pattern back to the inputs. Both give the same set; ``auto`` picks the
    one with fewer starting terms.
    """
    if isinstance(iface, Subcircuit):
        iface = factor_interface(iface)
    gates = with_surrogate_angles(iface.subcircuit.gates)
    if direction == "auto":
        forward_terms = 4**iface.num_inputs * 2 ** len(iface.fresh)
        direction = "forward" if forward_terms <= 4**iface.num_outputs else "backward"
    if direction == "forward":
        members = _forward_support(iface, gates)
    elif direction == "backward":
        members = _backward_support(iface, gates)
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return SupportSet(iface.dims, frozenset(members))


def chain_prune(plan: CutPlan, supports, allow_zero: bool = False) -> tuple[list[SupportSet], int]:
    """Intersect each cut variable's letters across producer and consumer until nothing changes.

    Returns the pruned supports and the number of sweeps that changed something.
    With ``allow_zero`` an empty intersection means the contracted result is
    identically zero (possible when a single observable is pinned); every support
    is then emptied. Otherwise it raises ``SupportError``.
    """
    supports = list(supports)
    if len(supports) != len(plan.subcircuits):
        raise SupportError("need one support per subcircuit")
    if allow_zero and any(len(s) == 0 for s in supports):
        return [SupportSet(s.dims, frozenset()) for s in supports], 0
    cut_vars = [c.var_id for c in plan.cut_points]
    sweeps = 0
    while True:
        changed = False
        for var in cut_vars:
            holders = [i for i, s in enumerate(supports) if var in s.dims]
            allowed = {0, 1, 2, 3}
            for i in holders:
                allowed &= supports[i].letters(var)
            if not allowed:
                if allow_zero:
                    return [SupportSet(s.dims, frozenset()) for s in supports], sweeps + 1
                raise SupportError(f"cut variable {var} has no admissible letter")
            for i in holders:
                pruned = supports[i].restrict(var, allowed)
                if len(pruned) != len(supports[i]):
                    supports[i] = pruned
                    changed = True
        if not changed:
            return supports, sweeps
        sweeps += 1

