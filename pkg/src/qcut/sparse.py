"""Sparse factor tensors, hash-join contraction, greedy ordering and memory/FLOP accounting."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .pauli import LETTERS, ZERO_TOL, encode

MAX_DIMS = 32
ENTRY_BYTES = 16
VALUE_BYTES = 4
HASH_OVERHEAD_BYTES = 48
DENSE_MEMORY_CAP = 2 * 1024**3


class ContractionError(ValueError):
    pass


class DenseMemoryError(MemoryError):
    pass


def _check_dims(dims) -> tuple[str, ...]:
    dims = tuple(dims)
    if len(set(dims)) != len(dims):
        raise ContractionError(f"duplicate variable id in {dims}")
    if len(dims) > MAX_DIMS:
        raise ContractionError(f"{len(dims)} dims exceed the packed-index limit of {MAX_DIMS}")
    return dims


@dataclass(frozen=True, eq=False)
class SparseFactor:
    """Non-zero entries of a tensor whose dims all have extent 4.

    ``index`` holds packed base-4 multi-indices (first dim most significant),
    sorted and unique; ``values`` the matching coefficients.
    """

    dims: tuple[str, ...]
    index: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dims", _check_dims(self.dims))
        idx = np.asarray(self.index, dtype=np.int64).reshape(-1)
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if idx.shape != vals.shape:
            raise ValueError("index and values differ in length")
        order = np.argsort(idx, kind="stable")
        idx, vals = idx[order], vals[order]
        if len(idx) and (np.any(np.diff(idx) == 0) or idx[0] < 0 or idx[-1] >= 4 ** len(self.dims)):
            raise ValueError("indices must be unique and within range")
        object.__setattr__(self, "index", idx)
        object.__setattr__(self, "values", vals)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseFactor):
            return NotImplemented
        return (
            self.dims == other.dims
            and np.array_equal(self.index, other.index)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    @classmethod
    def from_mapping(cls, dims, mapping, zero_tol: float = ZERO_TOL) -> SparseFactor:
        """Build from ``{letters: value}``; keys are label strings or letter-code tuples."""
        items = []
        for key, v in mapping.items():
            code = encode(key) if isinstance(key, str) else _pack(key)
            if abs(v) > zero_tol:
                items.append((code, v))
        items.sort()
        return cls(dims, [k for k, _ in items], [v for _, v in items])

    @classmethod
    def from_dense(cls, dims, array, zero_tol: float = ZERO_TOL) -> SparseFactor:
        flat = np.asarray(array, dtype=float).reshape(-1)
        nz = np.flatnonzero(np.abs(flat) > zero_tol)
        return cls(dims, nz, flat[nz])

    @classmethod
    def scalar(cls, value: float) -> SparseFactor:
        return cls((), [0], [value]) if abs(value) > ZERO_TOL else cls((), [], [])

    @property
    def nnz(self) -> int:
        return len(self.index)

    @property
    def size(self) -> int:
        return 4 ** len(self.dims)

    @property
    def sparsity(self) -> float:
        """Fraction of entries that are non-zero."""
        return self.nnz / self.size

    @property
    def entries(self) -> list[tuple[int, float]]:
        return list(zip(self.index.tolist(), self.values.tolist()))

    def get(self, letters) -> float:
        code = encode(letters) if isinstance(letters, str) else _pack(letters)
        i = np.searchsorted(self.index, code)
        if i < len(self.index) and self.index[i] == code:
            return float(self.values[i])
        return 0.0

    def labelled(self) -> dict[str, float]:
        return {_label(k, len(self.dims)): v for k, v in self.entries}

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.size)
        out[self.index] = self.values
        return out.reshape((4,) * len(self.dims))

    def permute(self, dims) -> SparseFactor:
        dims = tuple(dims)
        if sorted(dims) != sorted(self.dims):
            raise ContractionError(f"cannot permute {self.dims} to {dims}")
        if dims == self.dims:
            return self
        digits = _digits(self.index, len(self.dims))
        pos = [self.dims.index(d) for d in dims]
        return SparseFactor(dims, _pack_columns(digits[:, pos]), self.values)

    def filter(self, keep: np.ndarray) -> SparseFactor:
        return SparseFactor(self.dims, self.index[keep], self.values[keep])

    def allclose(self, other: SparseFactor, atol: float = 1e-9) -> bool:
        other = other.permute(self.dims)
        a, b = self.labelled(), other.labelled()
        return all(abs(a.get(k, 0.0) - b.get(k, 0.0)) <= atol for k in set(a) | set(b))

    def to_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "entries": [{"index": list(lbl), "value": v} for lbl, v in self.labelled().items()],
        }

    @classmethod
    def from_dict(cls, data: dict) -> SparseFactor:
        return cls.from_mapping(data["dims"], {"".join(e["index"]): e["value"] for e in data["entries"]}, zero_tol=0.0)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def _pack(letters) -> int:
    code = 0
    for x in letters:
        code = (code << 2) | int(x)
    return code


def _label(code: int, width: int) -> str:
    return "".join(LETTERS[(code >> (2 * (width - 1 - i))) & 3] for i in range(width))


def _digits(index: np.ndarray, width: int) -> np.ndarray:
    shifts = 2 * np.arange(width - 1, -1, -1, dtype=np.int64)
    return (index[:, None] >> shifts[None, :]) & 3


def _pack_columns(digits: np.ndarray) -> np.ndarray:
    out = np.zeros(len(digits), dtype=np.int64)
    for col in range(digits.shape[1]):
        out = (out << 2) | digits[:, col]
    return out


# ---------------------------------------------------------------- pairwise contraction


def _split(t: SparseFactor, common: list[str]):
    """Per-entry (common key, uncommon key) projections and the uncommon dims."""
    digits = _digits(t.index, len(t.dims))
    cpos = [t.dims.index(d) for d in common]
    upos = [i for i, d in enumerate(t.dims) if d not in common]
    return _pack_columns(digits[:, cpos]).tolist(), _pack_columns(digits[:, upos]).tolist(), [t.dims[i] for i in upos]


def hash_join(t1: SparseFactor, t2: SparseFactor, zero_tol: float = ZERO_TOL) -> tuple[SparseFactor, int]:
    """Contract shared dims of ``t1`` and ``t2``; returns the result and its multiply-add count."""
    common = [d for d in t1.dims if d in t2.dims]
    c1, u1, unc1 = _split(t1, common)
    c2, u2, unc2 = _split(t2, common)
    _check_dims(unc1 + unc2)
    width2 = 4 ** len(unc2)
    v1, v2 = t1.values.tolist(), t2.values.tolist()

    # hash the smaller tensor, stream the larger one
    hash_first = t1.nnz <= t2.nnz
    if hash_first:
        small, large = (c1, u1, v1), (c2, u2, v2)
    else:
        small, large = (c2, u2, v2), (c1, u1, v1)
    table: dict[int, list[tuple[int, float]]] = {}
    for c, u, v in zip(*small):
        table.setdefault(c, []).append((u, v))

    acc: dict[int, float] = {}
    flops = 0
    for c, u, v in zip(*large):
        bucket = table.get(c)
        if bucket is None:
            continue
        flops += len(bucket)
        for us, vs in bucket:
            key = us * width2 + u if hash_first else u * width2 + us
            acc[key] = acc.get(key, 0.0) + v * vs

    keys = sorted(k for k, val in acc.items() if abs(val) > zero_tol)
    return SparseFactor(tuple(unc1 + unc2), keys, [acc[k] for k in keys]), flops


def sparse_contract(t1: SparseFactor, t2: SparseFactor) -> SparseFactor:
    """Hash-join contraction; result dims are uncommon(t1) followed by uncommon(t2)."""
    return hash_join(t1, t2)[0]


def dense_flops(t1: SparseFactor, t2: SparseFactor) -> int:
    """Multiply-adds of a dense contraction: one per point of the joint index space."""
    return 4 ** len(set(t1.dims) | set(t2.dims))


def dense_contract(t1: SparseFactor, t2: SparseFactor, memory_cap: int = DENSE_MEMORY_CAP) -> SparseFactor:
    """Baseline: materialise both operands and contract with einsum."""
    common = [d for d in t1.dims if d in t2.dims]
    out_dims = [d for d in t1.dims if d not in common] + [d for d in t2.dims if d not in common]
    _check_dims(out_dims)
    needed = 8 * (t1.size + t2.size + 4 ** len(out_dims))
    if needed > memory_cap:
        raise DenseMemoryError(f"dense contraction needs {needed} bytes, cap is {memory_cap}")
    letters = {d: chr(ord("a") + i) if i < 26 else chr(ord("A") + i - 26) for i, d in enumerate(dict.fromkeys(t1.dims + t2.dims))}
    spec = "{},{}->{}".format(
        "".join(letters[d] for d in t1.dims),
        "".join(letters[d] for d in t2.dims),
        "".join(letters[d] for d in out_dims),
    )
    return SparseFactor.from_dense(tuple(out_dims), np.einsum(spec, t1.to_dense(), t2.to_dense()))


# ---------------------------------------------------------------- planning


@dataclass(frozen=True)
class ContractionStep:
    left: int
    right: int
    shared: tuple[str, ...]


@dataclass(frozen=True)
class ContractionPlan:
    """Binary contraction tree.

    Input factors have ids ``0 .. k-1``; step ``s`` produces id ``k + s``.
    """

    num_factors: int
    steps: tuple[ContractionStep, ...]
    final_dims: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "num_factors": self.num_factors,
            "steps": [[s.left, s.right, list(s.shared)] for s in self.steps],
            "final_dims": list(self.final_dims),
        }


def plan_contraction(factors, query_vars=None) -> ContractionPlan:
    """Greedy order: contract the pair with the smallest estimated result size.

    The estimate is ``nnz1 * nnz2 / 4 ** shared`` (uniform density); ties go to the
    pair created first. Pairs sharing no variable are only considered when no
    pair shares one.
    """
    factors = list(factors)
    if not factors:
        raise ContractionError("nothing to contract")
    counts: dict[str, int] = {}
    for f in factors:
        for d in f.dims:
            counts[d] = counts.get(d, 0) + 1
    query = list(query_vars) if query_vars is not None else [d for d, c in counts.items() if c == 1]
    missing = [v for v in query if v not in counts]
    if missing:
        raise ContractionError(f"query variables not present in any factor: {missing}")
    for d, c in counts.items():
        if d in query and c != 1:
            raise ContractionError(f"query variable {d} appears in {c} factors")
        if d not in query and c != 2:
            raise ContractionError(f"variable {d} appears in {c} factors; expected a producer and a consumer")

    live = {i: (f.dims, float(f.nnz)) for i, f in enumerate(factors)}
    steps = []
    next_id = len(factors)
    while len(live) > 1:
        best = None
        for (i, (di, ni)), (j, (dj, nj)) in combinations(sorted(live.items()), 2):
            shared = [d for d in di if d in dj]
            key = (0 if shared else 1, ni * nj / 4 ** len(shared), i, j)
            if best is None or key < best[0]:
                best = (key, i, j, shared)
        _, i, j, shared = best
        di, ni = live.pop(i)
        dj, nj = live.pop(j)
        dims = tuple(d for d in di if d not in shared) + tuple(d for d in dj if d not in shared)
        live[next_id] = (dims, min(ni * nj / 4 ** len(shared), 4.0 ** len(dims)))
        steps.append(ContractionStep(i, j, tuple(shared)))
        next_id += 1
    return ContractionPlan(len(factors), tuple(steps), tuple(v for v in query))


def sequential_plan(factors, query_vars=None) -> ContractionPlan:
    """Left-to-right fold in factor order; an alternative tree for cross-checks."""
    greedy = plan_contraction(factors, query_vars)
    factors = list(factors)
    steps = []
    dims = factors[0].dims
    acc = 0
    for k in range(1, len(factors)):
        shared = tuple(d for d in dims if d in factors[k].dims)
        steps.append(ContractionStep(acc, k, shared))
        dims = tuple(d for d in dims if d not in shared) + tuple(d for d in factors[k].dims if d not in shared)
        acc = len(factors) + k - 1
    return ContractionPlan(len(factors), tuple(steps), greedy.final_dims)


# ---------------------------------------------------------------- cost accounting


@dataclass(frozen=True)
class StepCost:
    nnz_a: int
    nnz_b: int
    nnz_d: int
    size_a: int
    size_b: int
    size_d: int
    flops: int
    dense_flops: int
    hash_overhead_bytes: int = HASH_OVERHEAD_BYTES

    @property
    def sparse_bytes(self) -> int:
        """16 bytes per stored entry plus hash overhead on the hashed operand and the output."""
        stored = self.nnz_a + self.nnz_b + self.nnz_d
        return ENTRY_BYTES * stored + self.hash_overhead_bytes * (min(self.nnz_a, self.nnz_b) + self.nnz_d)

    @property
    def dense_bytes(self) -> int:
        return VALUE_BYTES * (self.size_a + self.size_b + self.size_d)


@dataclass(frozen=True)
class CostReport:
    flops: int
    dense_flops: int
    steps: tuple[StepCost, ...] = ()
    wall_time_s: float = 0.0
    hash_overhead_bytes: int = HASH_OVERHEAD_BYTES

    @property
    def peak(self) -> StepCost | None:
        """Step with the largest modelled sparse footprint."""
        return max(self.steps, key=lambda s: (s.sparse_bytes, s.dense_bytes), default=None)

    @property
    def sparse_bytes_model(self) -> int:
        return max((s.sparse_bytes for s in self.steps), default=0)

    @property
    def dense_bytes_model(self) -> int:
        return max((s.dense_bytes for s in self.steps), default=0)

    @property
    def reduction_pct(self) -> float:
        if not self.dense_bytes_model:
            return 0.0
        return 100.0 * (1.0 - self.sparse_bytes_model / self.dense_bytes_model)

    def _sparsity(self, attr: str) -> float:
        p = self.peak
        if p is None:
            return 0.0
        nnz, size = getattr(p, f"nnz_{attr}"), getattr(p, f"size_{attr}")
        return nnz / size

    def to_row(self) -> dict:
        return {
            "flops": self.flops,
            "dense_flops": self.dense_flops,
            "sparsity_a": self._sparsity("a"),
            "sparsity_b": self._sparsity("b"),
            "sparsity_d": self._sparsity("d"),
            "sparse_bytes_model": self.sparse_bytes_model,
            "dense_bytes_model": self.dense_bytes_model,
            "reduction_pct": self.reduction_pct,
        }

    def to_dict(self) -> dict:
        out = self.to_row()
        out.update(
            entry_bytes=ENTRY_BYTES,
            value_bytes=VALUE_BYTES,
            hash_overhead_bytes=self.hash_overhead_bytes,
            steps=[
                {
                    "nnz": [s.nnz_a, s.nnz_b, s.nnz_d],
                    "size": [s.size_a, s.size_b, s.size_d],
                    "flops": s.flops,
                    "dense_flops": s.dense_flops,
                }
                for s in self.steps
            ],
        )
        return out


def cost_report(run: ContractionRun) -> CostReport:
    return run.report


@dataclass(frozen=True)
class ContractionRun:
    result: SparseFactor
    report: CostReport


def contract_all(factors, plan: ContractionPlan, hash_overhead_bytes: int = HASH_OVERHEAD_BYTES) -> ContractionRun:
    """Fold ``hash_join`` over ``plan`` and collect per-step costs."""
    pool = dict(enumerate(factors))
    if len(pool) != plan.num_factors:
        raise ContractionError(f"plan expects {plan.num_factors} factors, got {len(pool)}")
    start = time.perf_counter()
    steps = []
    total, total_dense = 0, 0
    next_id = len(pool)
    for step in plan.steps:
        a, b = pool.pop(step.left), pool.pop(step.right)
        d, flops = hash_join(a, b)
        df = dense_flops(a, b)
        steps.append(StepCost(a.nnz, b.nnz, d.nnz, a.size, b.size, d.size, flops, df, hash_overhead_bytes))
        total += flops
        total_dense += df
        pool[next_id] = d
        next_id += 1
    if len(pool) != 1:
        raise ContractionError("plan leaves more than one factor")
    (result,) = pool.values()
    result = result.permute(plan.final_dims)
    report = CostReport(total, total_dense, tuple(steps), time.perf_counter() - start, hash_overhead_bytes)
    return ContractionRun(result, report)
