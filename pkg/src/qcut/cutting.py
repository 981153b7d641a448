"""Wire-cut planning: wire-segment graph, greedy width-constrained cuts, subcircuit extraction."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import networkx as nx

from .circuit import Circuit, Gate


class PlanError(ValueError):
    pass


class CyclicPlanError(PlanError):
    pass


def terminal_var(qubit: int) -> str:
    return f"q{qubit}"


@dataclass(frozen=True, order=True)
class CutPoint:
    """Cut on ``qubit``'s wire immediately after the gate at ``position``."""

    qubit: int
    position: int
    var_id: str = field(default="", compare=False)


@dataclass(frozen=True)
class Subcircuit:
    """One independently executable fragment.

    Local qubit ``i`` is the wire piece ``pieces[i]`` = (global qubit, piece index).
    ``starts[i]`` is the cut variable initialising the piece, or ``None`` for a
    fresh |0>; ``ends[i]`` is the cut variable it feeds, or the terminal variable
    of its global qubit.
    """

    index: int
    gates: tuple[Gate, ...]
    gate_positions: tuple[int, ...]
    pieces: tuple[tuple[int, int], ...]
    starts: tuple[str | None, ...]
    ends: tuple[str, ...]
    terminal: tuple[bool, ...]

    @property
    def width(self) -> int:
        return len(self.pieces)

    @property
    def input_edges(self) -> list[tuple[int, str]]:
        return [(i, v) for i, v in enumerate(self.starts) if v is not None]

    @property
    def output_edges(self) -> list[tuple[int, str]]:
        return [(i, v) for i, v in enumerate(self.ends) if not self.terminal[i]]

    @property
    def fresh_qubits(self) -> list[int]:
        return [i for i, v in enumerate(self.starts) if v is None]

    @property
    def terminal_qubits(self) -> list[int]:
        return [i for i, t in enumerate(self.terminal) if t]

    def global_qubit(self, local: int) -> int:
        return self.pieces[local][0]

    @property
    def dims(self) -> list[str]:
        """Factor dimensions: inputs, then cut outputs, then terminals (local order each)."""
        return (
            [v for _, v in self.input_edges]
            + [v for _, v in self.output_edges]
            + [self.ends[i] for i in self.terminal_qubits]
        )

    def as_circuit(self) -> Circuit:
        return Circuit(max(self.width, 1), self.gates, f"sub{self.index}")


@dataclass(frozen=True)
class CutPlan:
    circuit: Circuit
    subcircuits: tuple[Subcircuit, ...]
    cut_points: tuple[CutPoint, ...]

    @property
    def query_vars(self) -> list[str]:
        return [terminal_var(q) for q in range(self.circuit.num_qubits)]

    @property
    def num_cuts(self) -> int:
        return len(self.cut_points)

    @property
    def widths(self) -> list[int]:
        return [s.width for s in self.subcircuits]

    def producer(self, var: str) -> Subcircuit:
        return next(s for s in self.subcircuits if var in s.ends)

    def to_dict(self) -> dict:
        from .circuit import circuit_to_dict

        subs = []
        for s in self.subcircuits:
            subs.append(
                {
                    "width": s.width,
                    "gates": circuit_to_dict(s.as_circuit())["gates"],
                    "gate_positions": list(s.gate_positions),
                    "qubits": [q for q, _ in s.pieces],
                    "inputs": [[f"q{i}", v] for i, v in s.input_edges],
                    "outputs": [[f"q{i}", v] for i, v in s.output_edges],
                    "terminals": [[f"q{i}", s.ends[i]] for i in s.terminal_qubits],
                }
            )
        return {
            "circuit": circuit_to_dict(self.circuit),
            "cuts": [{"qubit": c.qubit, "position": c.position, "var": c.var_id} for c in self.cut_points],
            "subcircuits": subs,
        }

    @classmethod
    def from_dict(cls, data: dict) -> CutPlan:
        from .circuit import circuit_from_dict

        circuit = circuit_from_dict(data["circuit"])
        cuts = [CutPoint(c["qubit"], c["position"], c["var"]) for c in data["cuts"]]
        return apply_manual_cuts(circuit, cuts)


# ---------------------------------------------------------------- wire graph


def build_wire_graph(circuit: Circuit) -> nx.MultiGraph:
    """Graph of wire segments joined by two-qubit gates.

    Every wire is split at each two-qubit gate it takes part in, so a wire with
    ``k`` such gates contributes ``k + 1`` segment nodes ``(qubit, k)``. Each
    two-qubit gate adds a clique of edges (keyed by gate position) between the
    two segments entering it and the two leaving it. Node attribute ``gates``
    lists the single-qubit gate positions inside the segment.
    """
    g = nx.MultiGraph()
    seg = [0] * circuit.num_qubits
    for q in range(circuit.num_qubits):
        g.add_node((q, 0), qubit=q, gates=[])
    for pos, gate in enumerate(circuit.gates):
        if len(gate.qubits) == 1:
            q = gate.qubits[0]
            g.nodes[(q, seg[q])]["gates"].append(pos)
            continue
        touched = []
        for q in gate.qubits:
            touched.append((q, seg[q]))
            seg[q] += 1
            g.add_node((q, seg[q]), qubit=q, gates=[])
            touched.append((q, seg[q]))
        for i in range(len(touched)):
            for j in range(i + 1, len(touched)):
                g.add_edge(touched[i], touched[j], key=pos)
    return g


# ---------------------------------------------------------------- splitting


class _Pieces:
    """Wire pieces and connected components induced by a set of cut positions."""

    def __init__(self, circuit: Circuit, cuts: dict[int, list[int]]):
        self.circuit = circuit
        self.cuts = {q: sorted(ps) for q, ps in cuts.items() if ps}
        self.offset = []
        total = 0
        for q in range(circuit.num_qubits):
            self.offset.append(total)
            total += len(self.cuts.get(q, ())) + 1
        self.parent = list(range(total))
        self.gate_piece: list[tuple[int, ...]] = []
        counter = [0] * circuit.num_qubits
        for pos, gate in enumerate(circuit.gates):
            ids = []
            for q in gate.qubits:
                ids.append(self.offset[q] + counter[q])
            self.gate_piece.append(tuple(ids))
            if len(ids) == 2:
                self._union(*ids)
            for q in gate.qubits:
                cq = self.cuts.get(q)
                if cq and counter[q] < len(cq) and cq[counter[q]] == pos:
                    counter[q] += 1
        self.size = total

    def _find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def _union(self, a: int, b: int) -> None:
        ra, rb = self._find(a), self._find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)

    def piece_of(self, pid: int) -> tuple[int, int]:
        q = max(i for i, off in enumerate(self.offset) if off <= pid)
        return q, pid - self.offset[q]

    def components(self) -> dict[int, list[int]]:
        comps: dict[int, list[int]] = {}
        for pid in range(self.size):
            comps.setdefault(self._find(pid), []).append(pid)
        return comps

    def cut_edges(self):
        """(upstream piece, downstream piece, qubit, position) for every cut."""
        for q, ps in self.cuts.items():
            for k, pos in enumerate(ps):
                yield self.offset[q] + k, self.offset[q] + k + 1, q, pos

    def max_width(self) -> int:
        counts: dict[int, int] = {}
        for pid in range(self.size):
            r = self._find(pid)
            counts[r] = counts.get(r, 0) + 1
        return max(counts.values())


def _validate_cuts(circuit: Circuit, cut_points) -> None:
    seen = set()
    for c in cut_points:
        if not 0 <= c.qubit < circuit.num_qubits:
            raise PlanError(f"cut on nonexistent wire {c.qubit}")
        if not 0 <= c.position < len(circuit.gates):
            raise PlanError(f"cut position {c.position} outside the circuit")
        if c.qubit not in circuit.gates[c.position].qubits:
            raise PlanError(f"gate {c.position} ({circuit.gates[c.position]}) does not act on qubit {c.qubit}")
        if (c.qubit, c.position) in seen:
            raise PlanError(f"duplicate cut at qubit {c.qubit}, position {c.position}")
        seen.add((c.qubit, c.position))
    names = [c.var_id for c in cut_points]
    if len(set(names)) != len(names):
        raise PlanError("cut variable ids must be unique")
    clash = set(names) & {terminal_var(q) for q in range(circuit.num_qubits)}
    if clash:
        raise PlanError(f"cut variable ids clash with terminal variables: {sorted(clash)}")


def apply_manual_cuts(circuit: Circuit, cut_points) -> CutPlan:
    """Split ``circuit`` at exactly the given cuts.

    Cut points without a ``var_id`` are named ``c0, c1, ...`` in (qubit, position) order.
    """
    cut_points = sorted(cut_points)
    named = []
    for i, c in enumerate(cut_points):
        named.append(c if c.var_id else CutPoint(c.qubit, c.position, f"c{i}"))
    _validate_cuts(circuit, named)
    cuts: dict[int, list[int]] = {}
    for c in named:
        cuts.setdefault(c.qubit, []).append(c.position)
    pieces = _Pieces(circuit, cuts)
    var_at = {(c.qubit, c.position): c.var_id for c in named}

    comps = pieces.components()
    root_of = {pid: r for r, pids in comps.items() for pid in pids}
    deps: dict[int, set[int]] = {r: set() for r in comps}
    indeg = {r: 0 for r in comps}
    for up, down, q, pos in pieces.cut_edges():
        ru, rd = root_of[up], root_of[down]
        if ru == rd:
            raise CyclicPlanError(f"cut {var_at[(q, pos)]} leaves and re-enters the same subcircuit")
        if rd not in deps[ru]:
            deps[ru].add(rd)
            indeg[rd] += 1

    # deterministic Kahn: among ready components, lowest first gate position first
    gate_pos: dict[int, list[int]] = {r: [] for r in comps}
    for pos, pids in enumerate(pieces.gate_piece):
        gate_pos[root_of[pids[0]]].append(pos)

    def key(r):
        return (gate_pos[r][0] if gate_pos[r] else math.inf, r)

    ready = [(key(r), r) for r in comps if indeg[r] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        _, r = heapq.heappop(ready)
        order.append(r)
        for d in sorted(deps[r]):
            indeg[d] -= 1
            if indeg[d] == 0:
                heapq.heappush(ready, (key(d), d))
    if len(order) != len(comps):
        raise CyclicPlanError("subcircuit dependency graph has a cycle")

    subs = []
    for idx, r in enumerate(order):
        pids = sorted(comps[r])
        local = {pid: i for i, pid in enumerate(pids)}
        plist, starts, ends, terminal = [], [], [], []
        for pid in pids:
            q, k = pieces.piece_of(pid)
            qcuts = pieces.cuts.get(q, [])
            plist.append((q, k))
            starts.append(var_at[(q, qcuts[k - 1])] if k > 0 else None)
            if k < len(qcuts):
                ends.append(var_at[(q, qcuts[k])])
                terminal.append(False)
            else:
                ends.append(terminal_var(q))
                terminal.append(True)
        gates = []
        for pos in gate_pos[r]:
            g = circuit.gates[pos]
            qs = tuple(local[pid] for pid in pieces.gate_piece[pos])
            gates.append(Gate(g.kind, qs, g.theta))
        subs.append(
            Subcircuit(
                index=idx,
                gates=tuple(gates),
                gate_positions=tuple(gate_pos[r]),
                pieces=tuple(plist),
                starts=tuple(starts),
                ends=tuple(ends),
                terminal=tuple(terminal),
            )
        )
    return CutPlan(circuit, tuple(subs), tuple(named))


# ---------------------------------------------------------------- greedy planner


def _candidates(circuit: Circuit) -> list[tuple[int, int]]:
    """Cut positions worth considering: after every two-qubit gate on a wire but its last."""
    two_q: dict[int, list[int]] = {}
    for pos, g in enumerate(circuit.gates):
        if len(g.qubits) == 2:
            for q in g.qubits:
                two_q.setdefault(q, []).append(pos)
    return sorted((q, p) for q, ps in two_q.items() for p in ps[:-1])


def _is_valid(circuit: Circuit, cuts: set, max_width: int) -> bool:
    try:
        plan = apply_manual_cuts(circuit, [CutPoint(q, p) for q, p in cuts])
    except CyclicPlanError:
        return False
    return max(plan.widths) <= max_width


def _score(circuit: Circuit, cuts: set) -> tuple:
    by_q: dict[int, list[int]] = {}
    for q, p in cuts:
        by_q.setdefault(q, []).append(p)
    pieces = _Pieces(circuit, by_q)
    counts: dict[int, int] = {}
    for pid in range(pieces.size):
        r = pieces._find(pid)
        counts[r] = counts.get(r, 0) + 1
    return max(counts.values()), sum(c * c for c in counts.values())


def _greedy_cuts(circuit: Circuit, max_width: int) -> set[tuple[int, int]]:
    """Add the cut that most reduces the widest component (then the sum of squared
    widths), ties to the lowest (qubit, position), until the plan is valid."""
    cuts: set[tuple[int, int]] = set()
    candidates = _candidates(circuit)
    while not _is_valid(circuit, cuts, max_width):
        best = None
        for c in candidates:
            if c in cuts:
                continue
            key = (*_score(circuit, cuts | {c}), c)
            if best is None or key < best:
                best = key
        if best is None:
            raise PlanError("no cut set satisfies the width limit")
        cuts.add(best[-1])
    return cuts


def _reaches(edges: dict[int, set[int]], src: int, dst: int) -> bool:
    stack, seen = [src], {src}
    while stack:
        x = stack.pop()
        if x == dst:
            return True
        for y in edges.get(x, ()):
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return False


def _sweep_cuts(circuit: Circuit, max_width: int, prefer_merge: bool = True) -> set[tuple[int, int]]:
    """Build subcircuits in gate order, cutting a wire only when a two-qubit gate
    would otherwise overflow a subcircuit or close a dependency cycle."""
    owner: list[int | None] = [None] * circuit.num_qubits
    last: list[int | None] = [None] * circuit.num_qubits
    width: dict[int, int] = {}
    edges: dict[int, set[int]] = {}
    cuts: set[tuple[int, int]] = set()
    fresh = iter(range(1 << 30))

    def new_sub(n: int) -> int:
        s = next(fresh)
        width[s] = n
        edges[s] = set()
        return s

    def move(q: int, target: int) -> None:
        src = owner[q]
        if last[q] is not None:
            cuts.add((q, last[q]))
            edges[src].add(target)
        else:
            width[src] -= 1
        width[target] += 1
        owner[q] = target

    for pos, gate in enumerate(circuit.gates):
        for q in gate.qubits:
            if owner[q] is None:
                owner[q] = new_sub(1)
        if len(gate.qubits) == 2:
            a, b = gate.qubits
            A, B = owner[a], owner[b]
            if A != B:
                options = []
                linked = _reaches(edges, A, B) or _reaches(edges, B, A)
                if not linked and width[A] + width[B] <= max_width:
                    options.append((0 if prefer_merge else 1, 0, "merge", None))
                for q, src, dst in ((b, B, A), (a, A, B)):
                    cost = 0 if last[q] is None else 1
                    if width[dst] + 1 <= max_width and not _reaches(edges, dst, src):
                        options.append((cost, width[dst], "move", (q, dst)))
                options.append((2, 0, "new", None))
                options.sort(key=lambda o: (o[0], o[1], o[2], o[3] or ()))
                _, _, action, arg = options[0]
                if action == "merge":
                    keep, gone = min(A, B), max(A, B)
                    width[keep] += width.pop(gone)
                    for s in edges:
                        if gone in edges[s]:
                            edges[s].discard(gone)
                            edges[s].add(keep)
                    edges[keep] |= edges.pop(gone)
                    for q in range(circuit.num_qubits):
                        if owner[q] == gone:
                            owner[q] = keep
                elif action == "move":
                    move(*arg)
                else:
                    c = new_sub(0)
                    move(a, c)
                    move(b, c)
        for q in gate.qubits:
            last[q] = pos
    return cuts


def _asap_depth(circuit: Circuit) -> list[int]:
    """Two-qubit-gate depth of every gate (single-qubit gates inherit their wire's depth)."""
    wire = [0] * circuit.num_qubits
    depth = []
    for gate in circuit.gates:
        d = max(wire[q] for q in gate.qubits)
        depth.append(d)
        if len(gate.qubits) == 2:
            for q in gate.qubits:
                wire[q] = d + 1
    return depth


def _peel_cuts(circuit: Circuit, max_width: int, by_depth: bool = True) -> set[tuple[int, int]]:
    """Carve predecessor-closed subcircuits one at a time.

    Only two-qubit gates are scheduled; single-qubit gates ride along with the
    wire piece they sit on. Each subcircuit grows from the earliest unassigned
    gate by admitting ready gates in order of ASAP depth, as long as its wire
    count stays within ``max_width``. Gates are ranked by ASAP depth, or by their
    lowest qubit when ``by_depth`` is false. Closing a subcircuit cuts each of its wires
    that still has two-qubit gates left, so every cut points from an earlier to a
    later subcircuit and the plan is acyclic.
    """
    gates = circuit.gates
    depth = _asap_depth(circuit) if by_depth else [min(g.qubits) for g in gates]
    on_wire: list[list[int]] = [[] for _ in range(circuit.num_qubits)]
    for pos, g in enumerate(gates):
        if len(g.qubits) == 2:
            for q in g.qubits:
                on_wire[q].append(pos)
    nxt = [0] * circuit.num_qubits  # index into on_wire of the next unassigned gate
    remaining = sum(map(len, on_wire)) // 2
    cuts: set[tuple[int, int]] = set()

    def ready(pos: int) -> bool:
        return all(nxt[q] < len(on_wire[q]) and on_wire[q][nxt[q]] == pos for q in gates[pos].qubits)

    while remaining:
        start = min(on_wire[q][nxt[q]] for q in range(circuit.num_qubits) if nxt[q] < len(on_wire[q]))
        held: set[int] = set()
        heap = [(depth[start], start)]
        while heap:
            _, pos = heapq.heappop(heap)
            if not ready(pos):
                continue
            new = [q for q in gates[pos].qubits if q not in held]
            if len(held) + len(new) > max_width:
                continue
            held.update(new)
            remaining -= 1
            for q in gates[pos].qubits:
                nxt[q] += 1
                if nxt[q] < len(on_wire[q]) and ready(on_wire[q][nxt[q]]):
                    cand = on_wire[q][nxt[q]]
                    heapq.heappush(heap, (depth[cand], cand))
        for q in held:
            if nxt[q] < len(on_wire[q]):
                cuts.add((q, on_wire[q][nxt[q] - 1]))
    return cuts


def _prune_redundant(circuit: Circuit, cuts: set, max_width: int) -> set:
    cuts = set(cuts)
    for c in sorted(cuts, reverse=True):
        if _is_valid(circuit, cuts - {c}, max_width):
            cuts.discard(c)
    return cuts


# the cut-by-cut search rescans every candidate per step; keep it to small circuits
_GREEDY_GATE_LIMIT = 400


def plan_cuts(circuit: Circuit, max_width: int) -> CutPlan:
    """Choose wire cuts so that every subcircuit fits ``max_width`` qubits.

    Runs two predecessor-closed peels, a gate-order sweep and (on small circuits)
    a greedy cut-by-cut search, drops redundant cuts from each and keeps the
    smallest valid cut set (ties: narrower widest subcircuit, then
    lexicographically smaller cut list).
    """
    if max_width < 2:
        raise PlanError("max_width must be at least 2")
    if any(len(g.qubits) > max_width for g in circuit.gates):
        raise PlanError("a single gate is wider than max_width")
    if circuit.num_qubits <= max_width:
        return apply_manual_cuts(circuit, [])
    results = []
    builders = [
        lambda: _peel_cuts(circuit, max_width),
        lambda: _peel_cuts(circuit, max_width, by_depth=False),
        lambda: _sweep_cuts(circuit, max_width),
    ]
    if len(circuit.gates) <= _GREEDY_GATE_LIMIT:
        builders.append(lambda: _greedy_cuts(circuit, max_width))
    for builder in builders:
        cuts = builder()
        if not _is_valid(circuit, cuts, max_width):
            continue
        cuts = _prune_redundant(circuit, cuts, max_width)
        results.append((len(cuts), _score(circuit, cuts)[0], sorted(cuts)))
    if not results:
        raise PlanError("no cut set satisfies the width limit")
    best = min(results)[2]
    return apply_manual_cuts(circuit, [CutPoint(q, p) for q, p in best])


def restitch(plan: CutPlan) -> Circuit:
    """Reassemble the original gate order from the subcircuits (cuts become identity wires)."""
    placed: dict[int, Gate] = {}
    for sub in plan.subcircuits:
        for g, pos in zip(sub.gates, sub.gate_positions):
            placed[pos] = Gate(g.kind, tuple(sub.global_qubit(q) for q in g.qubits), g.theta)
    return plan.circuit.with_gates(placed[p] for p in sorted(placed))
