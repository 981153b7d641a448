"""Gate-list circuit IR, OpenQASM 2 / JSON I/O, workload generators and pruning."""

from __future__ import annotations

import ast
import json
import math
import re
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np


class GateKind(str, Enum):
    I = "id"
    X = "x"
    Y = "y"
    Z = "z"
    H = "h"
    S = "s"
    SDG = "sdg"
    T = "t"
    TDG = "tdg"
    RX = "rx"
    RY = "ry"
    RZ = "rz"
    CNOT = "cx"
    CZ = "cz"

    @property
    def num_qubits(self) -> int:
        return 2 if self in (GateKind.CNOT, GateKind.CZ) else 1

    @property
    def is_rotation(self) -> bool:
        return self in (GateKind.RX, GateKind.RY, GateKind.RZ)


# Accept a few common aliases on input; output always uses the canonical value.
_KIND_ALIASES = {"i": GateKind.I, "cnot": GateKind.CNOT}


def gate_kind(name: str) -> GateKind:
    name = name.lower()
    if name in _KIND_ALIASES:
        return _KIND_ALIASES[name]
    return GateKind(name)


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    qubits: tuple[int, ...]
    theta: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if len(self.qubits) != self.kind.num_qubits:
            raise ValueError(f"{self.kind.value} acts on {self.kind.num_qubits} qubit(s), got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"repeated qubit in {self.kind.value}{self.qubits}")
        if self.kind.is_rotation:
            if self.theta is None or not math.isfinite(self.theta):
                raise ValueError(f"{self.kind.value} needs a finite angle, got {self.theta}")
            object.__setattr__(self, "theta", float(self.theta))
        elif self.theta is not None:
            raise ValueError(f"{self.kind.value} takes no angle")

    def __str__(self) -> str:
        args = ",".join(f"q[{q}]" for q in self.qubits)
        if self.kind.is_rotation:
            return f"{self.kind.value}({self.theta!r}) {args}"
        return f"{self.kind.value} {args}"


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    gates: tuple[Gate, ...] = ()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.num_qubits < 1:
            raise ValueError("circuit needs at least one qubit")
        for pos, g in enumerate(self.gates):
            if any(q < 0 or q >= self.num_qubits for q in g.qubits):
                raise ValueError(f"gate {pos} ({g}) outside a {self.num_qubits}-qubit register")

    def __len__(self) -> int:
        return len(self.gates)

    @property
    def num_rotations(self) -> int:
        return sum(g.kind.is_rotation for g in self.gates)

    def with_gates(self, gates) -> Circuit:
        return replace(self, gates=tuple(gates))


# ---------------------------------------------------------------- OpenQASM 2


class QasmError(ValueError):
    """Raised for malformed or unsupported OpenQASM input."""


class UnsupportedFeatureError(QasmError):
    pass


_IGNORED = ("OPENQASM", "include", "creg", "measure", "barrier")
_STMT = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*(?:\((.*)\))?\s*(.*)$", re.DOTALL)
_QARG = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*\[\s*(\d+)\s*\]\s*$")


def _eval_angle(expr: str, line: int) -> float:
    """Evaluate a literal angle expression: numbers, ``pi``, + - * / and parentheses."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Add, ast.Sub, ast.Mult, ast.Div)):
            a, b = ev(node.left), ev(node.right)
            if isinstance(node.op, ast.Add):
                return a + b
            if isinstance(node.op, ast.Sub):
                return a - b
            if isinstance(node.op, ast.Mult):
                return a * b
            return a / b
        raise QasmError(f"line {line}: malformed angle expression {expr!r}")

    try:
        tree = ast.parse(expr.strip(), mode="eval")
        value = ev(tree)
    except (SyntaxError, ZeroDivisionError) as exc:
        raise QasmError(f"line {line}: malformed angle expression {expr!r}") from exc
    if not math.isfinite(value):
        raise QasmError(f"line {line}: non-finite angle {expr!r}")
    return value


def _statements(text: str):
    """Yield (line number, statement) pairs with comments stripped."""
    text = re.sub(r"//[^\n]*", "", text)
    line = 1
    buf = []
    start = None
    for ch in text:
        if ch == ";":
            stmt = "".join(buf).strip()
            if stmt:
                yield start, stmt
            buf, start = [], None
            continue
        if start is None and not ch.isspace():
            start = line
        if ch == "\n":
            line += 1
        buf.append(ch)
    tail = "".join(buf).strip()
    if tail:
        raise QasmError(f"line {start}: missing ';' after {tail!r}")


def parse_qasm(text: str, name: str = "") -> Circuit:
    """Parse the supported OpenQASM 2 subset into a :class:`Circuit`."""
    reg = None
    width = 0
    gates: list[Gate] = []
    for line, stmt in _statements(text):
        head = stmt.split(None, 1)[0]
        if head.startswith(_IGNORED):
            continue
        if head == "qreg":
            m = re.fullmatch(r"qreg\s+([A-Za-z_][A-Za-z0-9_]*)\s*\[\s*(\d+)\s*\]", stmt)
            if not m:
                raise QasmError(f"line {line}: malformed qreg declaration {stmt!r}")
            if reg is not None:
                raise UnsupportedFeatureError(f"line {line}: only one qreg is supported")
            reg, width = m.group(1), int(m.group(2))
            continue
        m = _STMT.match(stmt)
        if not m:
            raise QasmError(f"line {line}: cannot parse {stmt!r}")
        op, params, args = m.groups()
        try:
            kind = gate_kind(op)
        except ValueError:
            raise QasmError(f"line {line}: unsupported gate {op!r}") from None
        if reg is None:
            raise QasmError(f"line {line}: gate {op!r} before qreg declaration")
        qubits = []
        for a in args.split(","):
            qm = _QARG.match(a)
            if not qm:
                raise QasmError(f"line {line}: malformed qubit argument {a.strip()!r}")
            if qm.group(1) != reg:
                raise QasmError(f"line {line}: unknown register {qm.group(1)!r}")
            qubits.append(int(qm.group(2)))
        theta = None
        if kind.is_rotation:
            if params is None:
                raise QasmError(f"line {line}: {op} needs an angle")
            theta = _eval_angle(params, line)
        elif params is not None:
            raise QasmError(f"line {line}: {op} takes no angle")
        try:
            gates.append(Gate(kind, tuple(qubits), theta))
        except ValueError as exc:
            raise QasmError(f"line {line}: {exc}") from None
    if reg is None:
        raise QasmError("no qreg declaration")
    try:
        return Circuit(width, tuple(gates), name)
    except ValueError as exc:
        raise QasmError(str(exc)) from None


def to_qasm(circuit: Circuit) -> str:
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{circuit.num_qubits}];"]
    lines += [f"{g};" for g in circuit.gates]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- JSON


def circuit_to_dict(circuit: Circuit) -> dict:
    gates = []
    for g in circuit.gates:
        d = {"kind": g.kind.value, "qubits": list(g.qubits)}
        if g.theta is not None:
            d["theta"] = g.theta
        gates.append(d)
    return {"qubits": circuit.num_qubits, "name": circuit.name, "gates": gates}


def circuit_from_dict(data: dict) -> Circuit:
    gates = [Gate(gate_kind(d["kind"]), tuple(d["qubits"]), d.get("theta")) for d in data["gates"]]
    return Circuit(int(data["qubits"]), tuple(gates), data.get("name", ""))


def load_circuit(path) -> Circuit:
    """Read a circuit from ``.qasm`` or ``.json``."""
    with open(path) as fh:
        text = fh.read()
    if str(path).endswith(".json"):
        return circuit_from_dict(json.loads(text))
    return parse_qasm(text, name=str(path))


# ---------------------------------------------------------------- workloads


class Family(str, Enum):
    HWEA = "hwea"
    QFT = "qft"
    GHZ = "ghz"


@dataclass(frozen=True)
class WorkloadSpec:
    family: Family
    num_qubits: int
    layers: int = 1
    angle_seed: int = 0
    entanglement: str = "linear"

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.family is Family.HWEA:
            if self.layers < 1:
                raise ValueError("HWEA needs at least one layer")
            if self.num_qubits < 1:
                raise ValueError("HWEA needs at least one qubit")
            if self.entanglement not in ("linear", "circular"):
                raise ValueError(f"unknown entanglement {self.entanglement!r}")
        elif self.num_qubits < 2:
            raise ValueError(f"{self.family.value} needs at least two qubits")


def _cz_pairs(n: int, entanglement: str) -> list[tuple[int, int]]:
    pairs = [(q, q + 1) for q in range(n - 1)]
    if entanglement == "circular" and n > 2:
        pairs.append((n - 1, 0))
    return pairs


def hwea(num_qubits: int, layers: int, seed: int = 0, entanglement: str = "linear") -> Circuit:
    """Hardware-efficient ansatz: ``layers`` x (RY, RZ column + CZ chain), then a closing RY, RZ column.

    Angles are drawn uniformly from [-pi, pi) with ``numpy.random.default_rng(seed)``
    in gate order.
    """
    pairs = _cz_pairs(num_qubits, entanglement)
    n_rot = 2 * num_qubits * (layers + 1)
    angles = iter(np.random.default_rng(seed).uniform(-math.pi, math.pi, n_rot))
    gates: list[Gate] = []
    for layer in range(layers + 1):
        for q in range(num_qubits):
            gates.append(Gate(GateKind.RY, (q,), next(angles)))
            gates.append(Gate(GateKind.RZ, (q,), next(angles)))
        if layer < layers:
            gates += [Gate(GateKind.CZ, p) for p in pairs]
    return Circuit(num_qubits, tuple(gates), f"hwea_{num_qubits}_{layers}")


def controlled_phase(phi: float, a: int, b: int) -> list[Gate]:
    """diag(1, 1, 1, e^{i phi}) on (a, b), up to global phase."""
    return [
        Gate(GateKind.RZ, (a,), phi / 2),
        Gate(GateKind.CNOT, (a, b)),
        Gate(GateKind.RZ, (b,), -phi / 2),
        Gate(GateKind.CNOT, (a, b)),
        Gate(GateKind.RZ, (b,), phi / 2),
    ]


def qft(num_qubits: int) -> Circuit:
    """QFT over {H, CNOT, RZ} without the closing swap network.

    Processes qubits from the highest index down, so qubit ``n-1`` receives the
    first Hadamard and the full chain of controlled phases.
    """
    gates: list[Gate] = []
    for j in reversed(range(num_qubits)):
        gates.append(Gate(GateKind.H, (j,)))
        for k in reversed(range(j)):
            gates += controlled_phase(math.pi / 2 ** (j - k), k, j)
    return Circuit(num_qubits, tuple(gates), f"qft_{num_qubits}")


def ghz(num_qubits: int) -> Circuit:
    gates = [Gate(GateKind.H, (0,))]
    gates += [Gate(GateKind.CNOT, (q, q + 1)) for q in range(num_qubits - 1)]
    return Circuit(num_qubits, tuple(gates), f"ghz_{num_qubits}")


def generate_workload(spec: WorkloadSpec) -> Circuit:
    if spec.family is Family.HWEA:
        return hwea(spec.num_qubits, spec.layers, spec.angle_seed, spec.entanglement)
    if spec.family is Family.QFT:
        return qft(spec.num_qubits)
    return ghz(spec.num_qubits)


def fig5_circuit() -> Circuit:
    """Two-qubit QFT on |11>, in a Clifford+T basis with CNOT as the only 2-qubit gate.

    Qubit 1 carries X, H, T before the controlled-S body; cutting its wire after
    that T separates the one-qubit factor from the rest.
    """
    return parse_qasm(
        """
        OPENQASM 2.0;
        qreg q[2];
        x q[0]; x q[1];
        h q[1]; t q[1];
        t q[0];
        cx q[1],q[0];
        tdg q[0];
        cx q[1],q[0];
        h q[0];
        """,
        name="qft2_fig5",
    )


# ---------------------------------------------------------------- pruning


def principal_angle(theta: float) -> float:
    """Reduce ``theta`` to (-pi, pi]."""
    r = math.remainder(theta, 2 * math.pi)
    return math.pi if r == -math.pi else r


def prune_parameters(circuit: Circuit, ratio: float) -> Circuit:
    """Zero the ``ceil(ratio * R)`` rotations with the smallest principal |theta|.

    Ties go to the earlier gate. Pruned gates stay in place with ``theta == 0``.
    """
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"prune ratio must lie in [0, 1], got {ratio}")
    rot = [i for i, g in enumerate(circuit.gates) if g.kind.is_rotation]
    # round() guards against ratio * R landing a hair above an integer
    n_prune = math.ceil(round(ratio * len(rot), 9))
    order = sorted(rot, key=lambda i: (abs(principal_angle(circuit.gates[i].theta)), i))
    victims = set(order[:n_prune])
    gates = [replace(g, theta=0.0) if i in victims else g for i, g in enumerate(circuit.gates)]
    return circuit.with_gates(gates)
