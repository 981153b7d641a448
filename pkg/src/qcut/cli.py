"""Command line: ``qcut cut|run|reconstruct|bench|oracle``.

Machine-readable output (JSON or CSV) goes to ``--out`` or stdout; a short
human summary goes to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import re
import sys
import time
from pathlib import Path

from .circuit import (
    Circuit,
    Family,
    WorkloadSpec,
    fig5_circuit,
    generate_workload,
    load_circuit,
    prune_parameters,
)
from .cutting import CutPlan, CutPoint, apply_manual_cuts, plan_cuts
from .oracle import expectation, simulate
from .pauli import decompose_density
from .pipeline import RunConfig, build_factors, expectation_from, reconstruct
from .sparse import SparseFactor

_CUT_RE = re.compile(r"^q(\d+):(?:(\d+)|after([A-Za-z]+)(?:#(\d+))?)(?::(\w+))?$")


class CliError(Exception):
    pass


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dump(data) -> str:
    return json.dumps(data, indent=1, sort_keys=False) + "\n"


def _threads(args) -> int:
    env = os.environ.get("QCUT_THREADS")
    if env:
        return max(int(env), 1)
    return args.threads or os.cpu_count() or 1


# ---------------------------------------------------------------- circuit sources


def _add_circuit_args(p: argparse.ArgumentParser) -> None:
    src = p.add_argument_group("circuit")
    src.add_argument("--circuit", help="OpenQASM 2 (.qasm) or JSON circuit file")
    src.add_argument("--workload", choices=[f.value for f in Family] + ["fig5"], help="generated circuit family")
    src.add_argument("--qubits", type=int, default=8)
    src.add_argument("--layers", type=int, default=1)
    src.add_argument("--angle-seed", type=int, default=0)
    src.add_argument("--entanglement", choices=["linear", "circular"], default="linear")
    src.add_argument("--prune", type=float, default=0.0, help="fraction of smallest rotation angles set to zero")


def _circuit(args) -> Circuit:
    if args.circuit and args.workload:
        raise CliError("give either --circuit or --workload, not both")
    if args.circuit:
        circuit = load_circuit(args.circuit)
    elif args.workload == "fig5":
        circuit = fig5_circuit()
    elif args.workload:
        spec = WorkloadSpec(Family(args.workload), args.qubits, args.layers, args.angle_seed, args.entanglement)
        circuit = generate_workload(spec)
    else:
        raise CliError("no circuit: use --circuit or --workload")
    return prune_parameters(circuit, args.prune) if args.prune else circuit


def parse_cut(text: str, circuit: Circuit) -> CutPoint:
    """``q<i>:<position>`` or ``q<i>:after<GATE>[#k]``, optionally followed by ``:<var>``."""
    m = _CUT_RE.match(text)
    if not m:
        raise CliError(f"bad cut spec {text!r}; expected q<i>:<pos> or q<i>:after<GATE>[#k][:var]")
    qubit = int(m.group(1))
    var = m.group(5) or ""
    if m.group(2) is not None:
        return CutPoint(qubit, int(m.group(2)), var)
    kind, nth = m.group(3).lower(), int(m.group(4) or 1)
    hits = [i for i, g in enumerate(circuit.gates) if qubit in g.qubits and g.kind.value == kind]
    if len(hits) < nth:
        raise CliError(f"wire q{qubit} has fewer than {nth} {kind} gate(s)")
    return CutPoint(qubit, hits[nth - 1], var)


def _plan(args, circuit: Circuit) -> CutPlan:
    if args.cut:
        return apply_manual_cuts(circuit, [parse_cut(c, circuit) for c in args.cut])
    if args.max_width is None or circuit.num_qubits <= args.max_width:
        return apply_manual_cuts(circuit, [])
    return plan_cuts(circuit, args.max_width)


def _load_or_make_plan(args) -> CutPlan:
    if getattr(args, "plan", None):
        return CutPlan.from_dict(json.loads(Path(args.plan).read_text()))
    return _plan(args, _circuit(args))


# ---------------------------------------------------------------- commands


def cmd_cut(args) -> int:
    plan = _plan(args, _circuit(args))
    _emit(_dump(plan.to_dict()), args.out)
    _say(f"cuts: {plan.num_cuts}; subcircuit widths: {plan.widths}")
    return 0


def _observable(args, plan: CutPlan) -> str | None:
    obs = args.observable
    if obs and len(obs) == 1 and plan.circuit.num_qubits > 1:
        obs = obs * plan.circuit.num_qubits
    return obs


def cmd_run(args) -> int:
    plan = _load_or_make_plan(args)
    config = RunConfig(
        mode=args.mode,
        shots=args.shots,
        noise=args.noise,
        seed=args.seed,
        observable=_observable(args, plan),
        mitigate=not args.no_mitigate,
        threads=_threads(args),
    )
    built = build_factors(plan, config)
    out = Path(args.out)
    (out / "factors").mkdir(parents=True, exist_ok=True)
    (out / "plan.json").write_text(_dump(plan.to_dict()))
    for r in built.runs:
        (out / "factors" / f"sub{r.index}.json").write_text(_dump(r.factor.to_dict()))
    (out / "supports.json").write_text(_dump([r.support.to_dict() for r in built.runs]))
    report = {
        "mode": config.mode,
        "shots": config.shots,
        "noise": config.noise,
        "seed": config.seed,
        "observable": config.observable,
        "settings": built.total_settings,
        "naive_settings": built.total_naive_settings,
        "subcircuits": [
            {
                "index": r.index,
                "dims": list(r.dims),
                "settings": r.num_settings,
                "naive_settings": r.naive_settings,
                "support_size": len(r.support),
                "factor_entries": r.factor.nnz,
                "transform_ops": r.transform_ops,
            }
            for r in built.runs
        ],
    }
    (out / "report.json").write_text(_dump(report))
    _say(f"settings: {built.total_settings} ({config.mode}) vs {built.total_naive_settings} naive; factors in {out}")
    return 0


def cmd_reconstruct(args) -> int:
    run_dir = Path(args.run_dir)
    plan_path = run_dir / "plan.json"
    if not plan_path.exists():
        raise CliError(f"{plan_path} not found; run `qcut run` first")
    plan = CutPlan.from_dict(json.loads(plan_path.read_text()))
    report_path = run_dir / "report.json"
    stored_obs = json.loads(report_path.read_text()).get("observable") if report_path.exists() else None
    factors = []
    for sub in plan.subcircuits:
        path = run_dir / "factors" / f"sub{sub.index}.json"
        if not path.exists():
            raise CliError(f"missing factor file {path}")
        factors.append(SparseFactor.from_dict(json.loads(path.read_text())))
    run = reconstruct(plan, factors, stored_obs, args.order)
    out = {"dims": list(run.result.dims), "result": run.result.to_dict(), "cost": run.report.to_dict()}
    obs = stored_obs or (_observable(args, plan) if args.observable else None)
    if obs:
        out["observable"] = obs
        out["expectation"] = expectation_from(run.result, obs)
        _say(f"<{obs}> = {out['expectation']:.12g}")
    _emit(_dump(out), args.out)
    _say(f"flops {run.report.flops} vs dense {run.report.dense_flops}; memory reduction {run.report.reduction_pct:.2f}%")
    return 0


BENCH_FIELDS = [
    "family",
    "qubits",
    "layers",
    "prune",
    "max_width",
    "status",
    "cuts",
    "factor_entries",
    "factor_size",
    "sparsity",
    "flops",
    "dense_flops",
    "sparsity_a",
    "sparsity_b",
    "sparsity_d",
    "sparse_bytes_model",
    "dense_bytes_model",
    "reduction_pct",
    "wall_time_s",
]


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def bench_rows(family: str, qubits, layers, prunes, max_width: int, query: str, seed: int = 0):
    """One row per (qubits, layers, prune) point; infeasible points get a status message."""
    for n in qubits:
        for d in layers:
            for r in prunes:
                row = {"family": family, "qubits": n, "layers": d, "prune": r, "max_width": max_width}
                start = time.perf_counter()
                try:
                    circuit = generate_workload(WorkloadSpec(Family(family), n, d, seed))
                    circuit = prune_parameters(circuit, r)
                    plan = plan_cuts(circuit, max_width) if n > max_width else apply_manual_cuts(circuit, [])
                    obs = "Z" * n if query == "z" else None
                    built = build_factors(plan, RunConfig(observable=obs))
                    run = reconstruct(plan, built.factors, obs)
                    entries = sum(f.nnz for f in built.factors)
                    size = sum(f.size for f in built.factors)
                    row.update(
                        status="ok",
                        cuts=plan.num_cuts,
                        factor_entries=entries,
                        factor_size=size,
                        sparsity=entries / size,
                        **run.report.to_row(),
                    )
                except (ValueError, MemoryError) as exc:  # a failed point is reported, not fatal
                    row["status"] = f"infeasible: {exc}"
                row["wall_time_s"] = round(time.perf_counter() - start, 6)
                yield row


def cmd_bench(args) -> int:
    rows = list(
        bench_rows(
            args.family,
            _int_list(args.qubits),
            _int_list(args.layers),
            _float_list(args.prune),
            args.max_width,
            args.query,
            args.angle_seed,
        )
    )
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=BENCH_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    _emit(buf.getvalue(), args.out)
    _say(f"{len(rows)} benchmark point(s)")
    return 0


def cmd_oracle(args) -> int:
    circuit = _circuit(args)
    state = simulate(circuit)
    if args.observable:
        obs = args.observable * circuit.num_qubits if len(args.observable) == 1 else args.observable
        value = expectation(state, obs)
        data = {"observable": obs, "expectation": value}
        _say(f"<{obs}> = {value:.12g}")
    else:
        data = {"width": circuit.num_qubits, "coefficients": decompose_density(state).labelled()}
        _say(f"{len(data['coefficients'])} non-zero Pauli coefficients")
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if args.observable:
            w.writerow(["observable", "expectation"])
            w.writerow([data["observable"], data["expectation"]])
        else:
            w.writerow(["pauli", "coefficient"])
            w.writerows(data["coefficients"].items())
        _emit(buf.getvalue(), args.out)
    else:
        _emit(_dump(data), args.out)
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcut", description="Wire-cutting engine with sparse reconstruction.")
    parser.add_argument("--threads", type=int, default=0, help="worker threads (QCUT_THREADS overrides)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cut", help="plan wire cuts and write the plan as JSON")
    _add_circuit_args(p)
    p.add_argument("--max-width", type=int)
    p.add_argument("--cut", action="append", help="manual cut, e.g. q1:afterT:A or q0:5 (repeatable)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_cut)

    p = sub.add_parser("run", help="compute supports and factors for every subcircuit")
    _add_circuit_args(p)
    p.add_argument("--plan", help="plan JSON written by `qcut cut`")
    p.add_argument("--max-width", type=int)
    p.add_argument("--cut", action="append")
    p.add_argument("--mode", choices=["naive", "aware"], default="aware")
    p.add_argument("--shots", type=int, default=0, help="shot budget per subcircuit; 0 = exact")
    p.add_argument("--noise", type=float, default=0.0, help="depolarizing probability per gate and qubit")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--observable", help="Pauli string (one letter is repeated over all qubits)")
    p.add_argument("--no-mitigate", action="store_true")
    p.add_argument("--out", required=True, help="run directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("reconstruct", help="contract the factors of a run directory")
    p.add_argument("run_dir")
    p.add_argument("--observable")
    p.add_argument("--order", choices=["greedy", "sequential"], default="greedy")
    p.add_argument("--out")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("bench", help="sweep workloads and write a CSV of costs")
    p.add_argument("--family", choices=[f.value for f in Family], default="hwea")
    p.add_argument("--qubits", default="8")
    p.add_argument("--layers", default="3")
    p.add_argument("--prune", default="0")
    p.add_argument("--max-width", type=int, default=20)
    p.add_argument("--query", choices=["z", "full"], default="z", help="Z on every qubit, or all terminal Paulis")
    p.add_argument("--angle-seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("oracle", help="statevector reference values")
    _add_circuit_args(p)
    p.add_argument("--observable")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ValueError, OSError, MemoryError) as exc:
        _say(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
