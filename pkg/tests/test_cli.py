import csv
import io
import json
import math

import numpy as np
import pytest
from helpers import random_cut_plan

from qcut.circuit import circuit_to_dict, to_qasm
from qcut.cli import BENCH_FIELDS, main
from qcut.oracle import expectation, simulate


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cut_hwea(tmp_path, capsys):
    path = tmp_path / "plan.json"
    code, _, err = _run(capsys, "cut", "--workload", "hwea", "--qubits", "8", "--layers", "2", "--max-width", "5", "--out", str(path))
    assert code == 0
    plan = json.loads(path.read_text())
    assert len(plan["cuts"]) == 2
    assert all(s["width"] <= 5 for s in plan["subcircuits"])
    assert "cuts: 2" in err


def test_cut_fits_without_cuts(capsys):
    code, out, _ = _run(capsys, "cut", "--workload", "hwea", "--qubits", "8", "--layers", "2", "--max-width", "8")
    assert code == 0
    assert json.loads(out)["cuts"] == []


def test_cut_manual_fig5(capsys):
    code, out, _ = _run(capsys, "cut", "--workload", "fig5", "--cut", "q1:afterT:A")
    assert code == 0
    plan = json.loads(out)
    assert plan["cuts"] == [{"qubit": 1, "position": 3, "var": "A"}]
    assert len(plan["subcircuits"]) == 2


def test_bad_cut_spec_exits_nonzero(capsys):
    code, _, err = _run(capsys, "cut", "--workload", "fig5", "--cut", "nonsense")
    assert code == 1 and "bad cut spec" in err
    code, _, _ = _run(capsys, "cut", "--workload", "fig5", "--cut", "q0:afterT#5")
    assert code == 1


def test_missing_circuit_file(capsys, tmp_path):
    code, _, err = _run(capsys, "cut", "--circuit", str(tmp_path / "absent.qasm"))
    assert code == 1 and "error" in err


def test_run_and_reconstruct_fig5(tmp_path, capsys):
    run_dir = tmp_path / "run"
    assert _run(capsys, "run", "--workload", "fig5", "--cut", "q1:afterT:A", "--out", str(run_dir))[0] == 0
    f0 = json.loads((run_dir / "factors" / "sub0.json").read_text())
    assert f0["dims"] == ["A"]
    vals = {"".join(e["index"]): e["value"] for e in f0["entries"]}
    assert vals == pytest.approx({"I": 0.5, "X": -1 / (2 * math.sqrt(2)), "Y": -1 / (2 * math.sqrt(2))}, abs=1e-12)
    f1 = json.loads((run_dir / "factors" / "sub1.json").read_text())
    # aware mode keeps only the pruned support; Z on the cut never survives
    assert len(f1["entries"]) == 10
    report = json.loads((run_dir / "report.json").read_text())
    assert report["subcircuits"][1]["support_size"] == 10

    code, out, _ = _run(capsys, "reconstruct", str(run_dir), "--observable", "XY")
    assert code == 0
    data = json.loads(out)
    assert data["expectation"] == pytest.approx(1.0, abs=1e-12)
    table = {"".join(e["index"]): e["value"] for e in data["result"]["entries"]}
    assert table == pytest.approx({"II": 0.25, "IY": -0.25, "XI": -0.25, "XY": 0.25}, abs=1e-12)
    assert "flops" in data["cost"] and "reduction_pct" in data["cost"]


def test_naive_and_aware_exact_outputs_match(tmp_path, capsys):
    args = ["run", "--workload", "hwea", "--qubits", "6", "--layers", "2", "--max-width", "4", "--prune", "0.5"]
    _run(capsys, *args, "--mode", "naive", "--out", str(tmp_path / "n"))
    _run(capsys, *args, "--mode", "aware", "--out", str(tmp_path / "a"))
    for f in sorted((tmp_path / "n" / "factors").iterdir()):
        aware = {tuple(e["index"]): e["value"] for e in json.loads((tmp_path / "a" / "factors" / f.name).read_text())["entries"]}
        naive = {tuple(e["index"]): e["value"] for e in json.loads(f.read_text())["entries"]}
        assert aware.keys() <= naive.keys()
        assert np.allclose([aware[k] for k in aware], [naive[k] for k in aware], atol=1e-12)
    results = []
    for mode in ("n", "a"):
        code, out, _ = _run(capsys, "reconstruct", str(tmp_path / mode), "--observable", "ZXZYZZ")
        assert code == 0
        results.append(json.loads(out)["expectation"])
    assert results[0] == pytest.approx(results[1], abs=1e-12)


def test_runs_are_byte_identical(tmp_path, capsys):
    args = ["run", "--workload", "fig5", "--cut", "q1:afterT:A", "--shots", "3000", "--noise", "0.02", "--seed", "9"]
    _run(capsys, *args, "--out", str(tmp_path / "x"))
    _run(capsys, "--threads", "4", *args, "--out", str(tmp_path / "y"))
    for rel in ["plan.json", "report.json", "supports.json", "factors/sub0.json", "factors/sub1.json"]:
        assert (tmp_path / "x" / rel).read_bytes() == (tmp_path / "y" / rel).read_bytes()
    _run(capsys, "reconstruct", str(tmp_path / "x"), "--out", str(tmp_path / "rx.json"))
    _run(capsys, "reconstruct", str(tmp_path / "y"), "--out", str(tmp_path / "ry.json"))
    assert (tmp_path / "rx.json").read_bytes() == (tmp_path / "ry.json").read_bytes()


def test_reconstruct_missing_factor(tmp_path, capsys):
    run_dir = tmp_path / "run"
    _run(capsys, "run", "--workload", "fig5", "--cut", "q1:afterT:A", "--out", str(run_dir))
    (run_dir / "factors" / "sub1.json").unlink()
    code, _, err = _run(capsys, "reconstruct", str(run_dir))
    assert code == 1 and "sub1.json" in err


def test_random_circuit_file_round_trip(tmp_path, capsys):
    plan = random_cut_plan(np.random.default_rng(17), 10, 30, max_cuts=3)
    qasm = tmp_path / "c.qasm"
    qasm.write_text(to_qasm(plan.circuit))
    cuts = [f"q{c.qubit}:{c.position}" for c in plan.cut_points]
    obs = "ZXIYZZXIYZ"
    run_dir = tmp_path / "run"
    argv = ["run", "--circuit", str(qasm), "--observable", obs, "--out", str(run_dir)]
    for c in cuts:
        argv += ["--cut", c]
    assert _run(capsys, *argv)[0] == 0
    code, out, _ = _run(capsys, "reconstruct", str(run_dir))
    assert code == 0
    assert json.loads(out)["expectation"] == pytest.approx(expectation(simulate(plan.circuit), obs), abs=1e-9)


def test_json_circuit_input(tmp_path, capsys):
    plan = random_cut_plan(np.random.default_rng(4), 4, 10, max_cuts=1)
    path = tmp_path / "c.json"
    path.write_text(json.dumps(circuit_to_dict(plan.circuit)))
    code, out, _ = _run(capsys, "oracle", "--circuit", str(path), "--observable", "Z")
    assert code == 0
    assert json.loads(out)["expectation"] == pytest.approx(expectation(simulate(plan.circuit), "ZZZZ"), abs=1e-12)


def test_oracle_fig5(capsys):
    code, out, _ = _run(capsys, "oracle", "--workload", "fig5")
    assert code == 0
    assert json.loads(out)["coefficients"] == pytest.approx({"II": 0.25, "IY": -0.25, "XI": -0.25, "XY": 0.25}, abs=1e-12)
    code, out, _ = _run(capsys, "oracle", "--workload", "fig5", "--observable", "XY", "--format", "csv")
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["observable", "expectation"] and float(rows[1][1]) == pytest.approx(1.0)


def test_bench_rows(capsys):
    code, out, _ = _run(capsys, "bench", "--family", "hwea", "--qubits", "10", "--layers", "2", "--prune", "0,0.5,0.9", "--max-width", "5")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 3 and all(r["status"] == "ok" for r in rows)
    sparsity = [float(r["sparsity"]) for r in rows]
    assert sparsity == sorted(sparsity, reverse=True)
    assert list(rows[0]) == BENCH_FIELDS


def test_bench_qft_flops_grow(capsys):
    code, out, _ = _run(capsys, "bench", "--family", "qft", "--qubits", "3,4,5", "--layers", "1", "--max-width", "2", "--query", "full")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    flops = [int(r["flops"]) for r in rows]
    assert all(r["status"] == "ok" for r in rows)
    assert flops == sorted(flops) and flops[-1] > flops[0]


def test_empty_bench_has_header_only(capsys):
    code, out, _ = _run(capsys, "bench", "--qubits", "")
    assert code == 0
    assert out.strip().split(",") == BENCH_FIELDS


def test_threads_env_override(monkeypatch, tmp_path, capsys):
    monkeypatch.setenv("QCUT_THREADS", "2")
    assert _run(capsys, "run", "--workload", "ghz", "--qubits", "4", "--max-width", "2", "--out", str(tmp_path))[0] == 0
