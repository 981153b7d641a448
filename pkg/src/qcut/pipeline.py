"""End-to-end orchestration: supports, factors per subcircuit, reconstruction."""

from __future__ import annotations

from dataclasses import dataclass, field

from .cutting import CutPlan
from .determinism import SupportSet, chain_prune, factor_interface, propagate_support
from .execution import (
    NoiseConfig,
    SubcircuitModel,
    basis_transform,
    mitigate,
    plan_experiments,
    run_experiments,
)
from .sparse import (
    ContractionRun,
    SparseFactor,
    contract_all,
    plan_contraction,
    sequential_plan,
)


@dataclass(frozen=True)
class RunConfig:
    """``shots`` is the shot budget per subcircuit; 0 evaluates every setting exactly."""

    mode: str = "aware"
    shots: int = 0
    noise: float = 0.0
    seed: int = 0
    observable: str | None = None
    mitigate: bool = True
    threads: int = 1


@dataclass(frozen=True)
class SubcircuitRun:
    index: int
    dims: tuple[str, ...]
    support: SupportSet
    num_settings: int
    naive_settings: int
    transform_ops: int
    factor: SparseFactor


@dataclass
class PipelineResult:
    plan: CutPlan
    config: RunConfig
    runs: list[SubcircuitRun] = field(default_factory=list)

    @property
    def factors(self) -> list[SparseFactor]:
        return [r.factor for r in self.runs]

    @property
    def total_settings(self) -> int:
        return sum(r.num_settings for r in self.runs)

    @property
    def total_naive_settings(self) -> int:
        return sum(r.naive_settings for r in self.runs)


def _check_observable(plan: CutPlan, observable: str | None) -> None:
    if observable is None:
        return
    if len(observable) != plan.circuit.num_qubits or set(observable) - set("IXYZ"):
        raise ValueError(f"observable must be {plan.circuit.num_qubits} letters from IXYZ, got {observable!r}")


def compute_supports(plan: CutPlan, observable: str | None = None) -> tuple[list[SupportSet], list[SupportSet]]:
    """Per-subcircuit supports before and after chain pruning."""
    _check_observable(plan, observable)
    raw = [propagate_support(factor_interface(s, observable)) for s in plan.subcircuits]
    pruned, _ = chain_prune(plan, raw, allow_zero=observable is not None)
    return raw, pruned


def build_factors(plan: CutPlan, config: RunConfig = RunConfig()) -> PipelineResult:
    _check_observable(plan, config.observable)
    _, supports = compute_supports(plan, config.observable)
    noise = NoiseConfig(config.noise, config.seed)
    result = PipelineResult(plan, config)
    for sub, support in zip(plan.subcircuits, supports):
        iface = factor_interface(sub, config.observable)
        naive = 4**iface.num_inputs * 3**iface.num_outputs
        settings = plan_experiments(iface, support, config.shots, config.mode)
        model = SubcircuitModel(iface, config.noise)
        raw = run_experiments(model, settings, noise, config.threads)
        aware = config.mode == "aware"
        transformed = basis_transform(raw, iface.dims, support if aware else None)
        factor = transformed.factor
        if aware and config.mitigate:
            factor = mitigate(factor, support)
        result.runs.append(
            SubcircuitRun(sub.index, iface.dims, support, len(settings), naive, transformed.ops, factor)
        )
    return result


def reconstruct(plan: CutPlan, factors, observable: str | None = None, order: str = "greedy") -> ContractionRun:
    """Contract all factors down to the terminal variables (or a scalar for one observable)."""
    query = [] if observable is not None else plan.query_vars
    factors = list(factors)
    if order == "greedy":
        cplan = plan_contraction(factors, query)
    elif order == "sequential":
        cplan = sequential_plan(factors, query)
    else:
        raise ValueError(f"unknown contraction order {order!r}")
    return contract_all(factors, cplan)


def expectation_from(result: SparseFactor, observable: str) -> float:
    """<P> from a reconstructed factor: a scalar, or the full factor entry times 2 ** width."""
    if not result.dims:
        return float(result.values[0]) if result.nnz else 0.0
    return result.get(observable) * 2 ** len(result.dims)


def estimate(plan: CutPlan, observable: str, config: RunConfig = RunConfig(), order: str = "greedy") -> float:
    """Run the whole pipeline for one Pauli observable."""
    cfg = RunConfig(config.mode, config.shots, config.noise, config.seed, observable, config.mitigate, config.threads)
    built = build_factors(plan, cfg)
    return expectation_from(reconstruct(plan, built.factors, observable, order).result, observable)
