"""Tomography of subcircuits: experiment planning, simulated runs, basis transform, mitigation."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .determinism import FactorInterface, SupportSet
from .pauli import LETTERS, ZERO_TOL
from .propagation import (
    INIT_STATES,
    PauliBatch,
    init_weights,
    input_marginals,
    propagate,
)
from .sparse import SparseFactor

MAX_LOCAL_WIDTH = 24
BASES = ("X", "Y", "Z")
# init states whose results define each input Pauli after the transform
_INITS_FOR_LETTER = {0: ("zero", "one"), 1: ("zero", "one", "plus"), 2: ("zero", "one", "i"), 3: ("zero", "one")}
# order in which a measured basis is borrowed for an identity output letter
_FOLD_ORDER = ("Z", "X", "Y")


class ExperimentError(ValueError):
    pass


class WidthBoundError(ExperimentError):
    pass


@dataclass(frozen=True)
class ExperimentSetting:
    """One circuit run: an init state per input edge and a basis per output dim."""

    inits: tuple[str, ...]
    meas: tuple[str, ...]
    shots: int = 0

    def __post_init__(self):
        if self.shots < 0:
            raise ValueError("shots must be non-negative")
        if any(s not in INIT_STATES for s in self.inits):
            raise ValueError(f"unknown init state in {self.inits}")
        if any(b not in BASES for b in self.meas):
            raise ValueError(f"unknown basis in {self.meas}")

    @property
    def key(self) -> tuple[tuple[str, ...], tuple[str, ...]]:
        return self.inits, self.meas

    def label(self) -> str:
        return f"{','.join(self.inits) or '-'}|{''.join(self.meas) or '-'}"


@dataclass(frozen=True)
class NoiseConfig:
    depolarizing_p: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.depolarizing_p < 1.0:
            raise ValueError("depolarizing_p must lie in [0, 1)")


@dataclass
class RawTomogram:
    """Setting results keyed by (inits, meas).

    Each value is an array over subsets of the output dims (bit ``j`` of the
    index selects output ``j``) holding the estimated product of the selected
    outcomes; entry 0 is 1 and the last entry is g for the full product.
    """

    num_inputs: int
    num_outputs: int
    values: dict[tuple, np.ndarray] = field(default_factory=dict)

    def add(self, setting: ExperimentSetting, result: np.ndarray) -> None:
        self.values[setting.key] = np.asarray(result, dtype=float)


# ---------------------------------------------------------------- planning


def _canonical(settings) -> list[tuple]:
    rank = {s: i for i, s in enumerate(INIT_STATES)}
    return sorted(settings, key=lambda k: ([rank[s] for s in k[0]], [BASES.index(b) for b in k[1]]))


def _naive_keys(n: int, m: int) -> list[tuple]:
    return [(i, b) for i in product(INIT_STATES, repeat=n) for b in product(BASES, repeat=m)]


def _aware_keys(n: int, m: int, support: SupportSet) -> list[tuple]:
    required = set()
    for member in support.members:
        ins, outs = member[:n], member[n:]
        meas = tuple(BASES[x - 1] if x else None for x in outs)
        for inits in product(*(_INITS_FOR_LETTER[x] for x in ins)):
            required.add((inits, meas))
    chosen = {k for k in required if None not in k[1]}
    for inits, meas in sorted(required, key=lambda k: (k[0], tuple(b or "" for b in k[1]))):
        if None not in meas:
            continue
        covered = any(
            c[0] == inits and all(want is None or want == got for want, got in zip(meas, c[1])) for c in chosen
        )
        if not covered:
            chosen.add((inits, tuple(b or _FOLD_ORDER[0] for b in meas)))
    return _canonical(chosen)


def plan_experiments(iface: FactorInterface, support: SupportSet | None, budget: int, mode: str) -> list[ExperimentSetting]:
    """Settings to run and their shot counts.

    ``naive`` runs every init/basis combination. ``aware`` keeps only the
    combinations that some support member depends on. ``budget`` shots are split
    evenly with the remainder going to the first settings; a budget of 0 means
    exact evaluation.
    """
    n, m = iface.num_inputs, iface.num_outputs
    if mode == "naive":
        keys = _naive_keys(n, m)
    elif mode == "aware":
        if support is None:
            raise ExperimentError("aware mode needs a support set")
        if support.dims != iface.dims:
            raise ExperimentError(f"support dims {support.dims} do not match factor dims {iface.dims}")
        keys = _aware_keys(n, m, support)
    else:
        raise ExperimentError(f"unknown mode {mode!r}")
    if budget and budget < len(keys):
        raise ExperimentError(f"budget of {budget} shots is below the {len(keys)} settings required")
    base, extra = divmod(budget, len(keys)) if keys else (0, 0)
    return [ExperimentSetting(i, b, base + (1 if k < extra else 0)) for k, (i, b) in enumerate(keys)]


# ---------------------------------------------------------------- running


class SubcircuitModel:
    """Heisenberg-picture tables for one factor interface and noise level.

    ``table(pinned)[pattern]`` holds, for every output letter pattern, the
    coefficients of U^dagger P U summed per input-letter tuple (terms with X/Y on
    fresh qubits dropped). With ``pinned`` the terminal letters fixed by the
    observable are included in P, otherwise those qubits carry I.
    """

    def __init__(self, iface: FactorInterface, noise: float = 0.0):
        if iface.width > MAX_LOCAL_WIDTH:
            raise WidthBoundError(f"subcircuit width {iface.width} exceeds the simulation bound {MAX_LOCAL_WIDTH}")
        self.iface = iface
        self.noise = noise
        self._tables: dict[bool, np.ndarray] = {}

    @property
    def has_pinned(self) -> bool:
        return any(letter for _, letter in self.iface.fixed)

    def table(self, pinned: bool = True) -> np.ndarray:
        pinned = pinned and self.has_pinned
        if pinned not in self._tables:
            iface = self.iface
            m = iface.num_outputs
            codes = []
            for b in range(4**m):
                letters = [(b >> (2 * (m - 1 - j))) & 3 for j in range(m)]
                code = iface.output_code(letters)
                if not pinned:
                    code = _strip(code, iface)
                codes.append(code)
            batch = propagate(PauliBatch.from_codes(iface.width, codes), iface.subcircuit.gates, backward=True, noise=self.noise)
            self._tables[pinned] = input_marginals(batch, len(codes), [q for q, _ in iface.inputs], iface.fresh)
        return self._tables[pinned]

    def subset_expectations(self, setting: ExperimentSetting, pinned: bool = True) -> np.ndarray:
        """Exact expectation of every product of measured outputs for ``setting``."""
        m = self.iface.num_outputs
        weights = init_weights(setting.inits)
        tab = self.table(pinned)
        out = np.empty(2**m)
        for mask in range(2**m):
            pattern = 0
            for j, basis in enumerate(setting.meas):
                letter = LETTERS.index(basis) if mask >> j & 1 else 0
                pattern |= letter << (2 * (m - 1 - j))
            out[mask] = tab[pattern] @ weights
        return out


def _strip(code: int, iface: FactorInterface) -> int:
    for q, _ in iface.fixed:
        code &= ~(3 << (2 * (iface.width - 1 - q)))
    return code


def _walsh(v: np.ndarray) -> np.ndarray:
    """Unnormalised Walsh-Hadamard transform over bit masks."""
    v = np.array(v, dtype=float)
    h = 1
    while h < len(v):
        v = v.reshape(-1, 2, h)
        v = np.stack([v[:, 0] + v[:, 1], v[:, 0] - v[:, 1]], axis=1).reshape(-1)
        h *= 2
    return v


def setting_rng(seed: int, subcircuit: int, setting_index: int) -> np.random.Generator:
    """Independent stream per (seed, subcircuit, setting), whatever the execution order."""
    return np.random.default_rng([seed, subcircuit, setting_index])


def run_setting(
    model: SubcircuitModel,
    setting: ExperimentSetting,
    noise: NoiseConfig | None = None,
    setting_index: int = 0,
) -> np.ndarray:
    """Subset-product values for one setting (see ``RawTomogram``).

    With ``shots == 0`` these are exact expectations. Otherwise outcomes are
    sampled from the exact outcome distribution of the measured outputs (plus
    one bit for the pinned terminal product) and averaged.
    """
    noise = noise or NoiseConfig()
    if abs(model.noise - noise.depolarizing_p) > 0:
        raise ExperimentError("model was built for a different noise level")
    m = model.iface.num_outputs
    pinned = model.subset_expectations(setting, pinned=True)
    if setting.shots == 0:
        return pinned
    if model.has_pinned:
        # extra top bit carries the product of the pinned terminal letters
        expect = np.concatenate([model.subset_expectations(setting, pinned=False), pinned])
    else:
        expect = pinned
    bits = m + (1 if model.has_pinned else 0)
    probs = np.clip(_walsh(expect) / 2**bits, 0.0, None)
    probs /= probs.sum()
    rng = setting_rng(noise.seed, model.iface.subcircuit.index, setting_index)
    counts = rng.multinomial(setting.shots, probs)
    est = _walsh(counts) / setting.shots
    return est[2**bits - 2**m :] if model.has_pinned else est


def run_experiments(
    model: SubcircuitModel,
    settings,
    noise: NoiseConfig | None = None,
    threads: int = 1,
) -> RawTomogram:
    raw = RawTomogram(model.iface.num_inputs, model.iface.num_outputs)
    settings = list(settings)

    def job(k):
        return run_setting(model, settings[k], noise, k)

    if threads > 1 and len(settings) > 1:
        model.table(True)
        if model.has_pinned:
            model.table(False)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, range(len(settings))))
    else:
        results = [job(k) for k in range(len(settings))]
    for s, r in zip(settings, results):
        raw.add(s, r)
    return raw


# ---------------------------------------------------------------- basis transform


@dataclass(frozen=True)
class TransformResult:
    factor: SparseFactor
    ops: int


def _lookup(raw: RawTomogram, inits, letters):
    """Value of the product over non-identity ``letters`` for ``inits``, borrowing any measured basis for I."""
    free = [j for j, x in enumerate(letters) if x == 0]
    mask = sum(1 << j for j, x in enumerate(letters) if x)
    for fill in product(_FOLD_ORDER, repeat=len(free)):
        meas = [LETTERS[x] if x else "" for x in letters]
        for j, b in zip(free, fill):
            meas[j] = b
        hit = raw.values.get((inits, tuple(meas)))
        if hit is not None:
            return hit[mask]
    return np.nan


def basis_transform(raw: RawTomogram, dims, support: SupportSet | None = None) -> TransformResult:
    """Turn init-state/basis results into Pauli-basis factor entries.

    Per input dim: f(I) = g0 + g1, f(X) = 2 g+ - g0 - g1, f(Y) = 2 gi - g0 - g1,
    f(Z) = g0 - g1. Each dim costs one 4-point transform per fibre, so the whole
    transform counts n * 4 ** (n + m - 1) fibre operations. Values are scaled by
    2 ** -m so factors follow the tr(rho P) / 2 ** width convention.

    Without ``support`` every setting must be present. With it, only entries in
    the support must be computable; others are dropped when unavailable.
    """
    n, m = raw.num_inputs, raw.num_outputs
    g = np.empty((4,) * n + (4,) * m)
    for inits_idx in product(range(4), repeat=n):
        inits = tuple(INIT_STATES[i] for i in inits_idx)
        for letters in product(range(4), repeat=m):
            g[inits_idx + letters] = _lookup(raw, inits, letters)
    if support is None and np.isnan(g).any():
        missing = np.argwhere(np.isnan(g))[0]
        inits = tuple(INIT_STATES[i] for i in missing[:n])
        raise ExperimentError(f"missing setting for inits {inits} and outputs {''.join(LETTERS[x] for x in missing[n:])}")

    ops = 0
    for axis in range(n):
        g0, g1, gp, gi = (np.take(g, k, axis=axis) for k in range(4))
        g = np.stack([g0 + g1, 2 * gp - g0 - g1, 2 * gi - g0 - g1, g0 - g1], axis=axis)
        ops += 4 ** (n + m - 1)
    flat = g.reshape(-1) / 2**m

    if support is not None:
        for member in support.members:
            code = 0
            for x in member:
                code = (code << 2) | x
            if np.isnan(flat[code]):
                raise ExperimentError(f"support entry {''.join(LETTERS[x] for x in member)} lacks a setting")
    keep = np.flatnonzero(~np.isnan(flat) & (np.abs(np.nan_to_num(flat)) > ZERO_TOL))
    return TransformResult(SparseFactor(tuple(dims), keep, flat[keep]), ops)


def mitigate(factor: SparseFactor, support: SupportSet) -> SparseFactor:
    """Drop every entry outside the support; such entries can only come from noise."""
    if tuple(factor.dims) != tuple(support.dims):
        raise ExperimentError(f"factor dims {factor.dims} do not match support dims {support.dims}")
    allowed = set()
    for member in support.members:
        code = 0
        for x in member:
            code = (code << 2) | x
        allowed.add(code)
    keep = np.array([int(i) in allowed for i in factor.index], dtype=bool)
    return factor.filter(keep)


def exact_factor(iface: FactorInterface, noise: float = 0.0) -> SparseFactor:
    """Factor read straight off the Heisenberg tables, without experiments."""
    tab = SubcircuitModel(iface, noise).table(True)
    n, m = iface.num_inputs, iface.num_outputs
    # tab is (output pattern, input tuple); factor dims are inputs then outputs
    flat = (tab.T.reshape(4**n, 4**m) * iface.scale()).reshape(-1)
    return SparseFactor.from_dense(iface.dims, flat.reshape((4,) * (n + m)) if n + m else flat)
