"""Command-line behavior: exit codes, report files, verification flow.

All invocations go through main() in-process; one test exercises the
installed console script.
"""

import json
import shutil
import subprocess

import pytest

from qspace.cli import AnalysisReport, main
from qspace.errors import InputError


TOY = json.dumps({"n": 2, "k": 1, "generators": ["ZZ"]})
FREE = json.dumps({"n": 1, "k": 1, "generators": []})


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


# -------------------------------------------------------------------- analyze

def test_analyze_writes_round_trippable_report(tmp_path, capsys):
    out = tmp_path / "report.json"
    csv_file = tmp_path / "levels.csv"
    plot_file = tmp_path / "chain.png"
    rc = main([
        "analyze", "--builtin", "five_one_three",
        "--output", str(out), "--csv", str(csv_file),
        "--plot", str(plot_file),
    ])
    assert rc == 0
    text = out.read_text(encoding="utf-8")
    report = AnalysisReport.from_json(text)
    assert report.to_json() == text
    assert report.code_name == "five_one_three"
    assert (report.n, report.k) == (5, 1)
    assert report.optimal_qubits == report.n - report.t_star == 4
    assert len(report.levels) == report.t_star == len(report.ordering) == 1
    assert report.seconds >= 0.0
    assert csv_file.read_text().splitlines()[0] == \
        "code,level,outcomes,rank,qubit"
    assert plot_file.stat().st_size > 0
    assert "optimal live qubits = 4" in capsys.readouterr().out


def test_analyze_handles_code_without_checks(tmp_path, capsys):
    rc = main(["analyze", "--code", write(tmp_path / "free.json", FREE)])
    out = capsys.readouterr().out
    assert rc == 0
    assert "T* = 0" in out
    assert "optimal live qubits = 1" in out


def test_analyze_reports_generator_index_on_parse_failure(tmp_path, capsys):
    bad = json.dumps({"n": 2, "k": 1, "generators": ["ZQ"]})
    rc = main(["analyze", "--code", write(tmp_path / "bad.json", bad)])
    assert rc == 4
    err = capsys.readouterr().err
    assert "generator 1" in err


def test_report_json_rejects_garbage():
    with pytest.raises(InputError):
        AnalysisReport.from_json("{\"code_name\": \"x\"}")


# ------------------------------------------------------- synthesize -> verify

def test_synthesize_then_verify_toy(tmp_path, capsys):
    code_file = write(tmp_path / "toy.json", TOY)
    circ_file = tmp_path / "toy_circuit.json"
    rc = main(["synthesize", "--code", code_file,
               "--out-circuit", str(circ_file)])
    assert rc == 0
    assert circ_file.exists()
    rc = main(["verify", "--code", code_file, "--circuit", str(circ_file)])
    out = capsys.readouterr().out
    assert rc == 0
    assert "verification passed" in out
    assert "outcome 0" in out and "outcome 1" in out


def test_verify_fails_on_perturbed_unitary(tmp_path, capsys):
    circ_file = tmp_path / "five.json"
    assert main(["synthesize", "--builtin", "five_one_three",
                 "--out-circuit", str(circ_file)]) == 0
    payload = json.loads(circ_file.read_text())
    step = next(s for s in payload["steps"] if s["kind"] == "unitary")
    label = sorted(step["table"])[0]
    step["table"][label][0][0][0] += 1e-3
    circ_file.write_text(json.dumps(payload))
    rc = main(["verify", "--builtin", "five_one_three",
               "--circuit", str(circ_file)])
    assert rc == 3
    assert "verification failed" in capsys.readouterr().out


def test_verify_fails_on_structural_mismatch(tmp_path, capsys):
    code_file = write(tmp_path / "toy.json", TOY)
    circ_file = tmp_path / "toy_circuit.json"
    assert main(["synthesize", "--code", code_file,
                 "--out-circuit", str(circ_file)]) == 0
    rc = main(["verify", "--builtin", "five_one_three",
               "--circuit", str(circ_file)])
    assert rc == 3
    assert "differ structurally" in capsys.readouterr().out


# --------------------------------------------------------------------- table1

def test_table1_matches_known_widths(tmp_path, capsys):
    csv_file = tmp_path / "table.csv"
    plot_file = tmp_path / "table.png"
    rc = main(["table1", "--json", "--csv", str(csv_file),
               "--plot", str(plot_file)])
    assert rc == 0
    out = capsys.readouterr().out
    rows = json.loads(out[:out.rindex("]") + 1])
    got = {r["code_name"]: r["optimal_qubits"] for r in rows}
    assert got == {"five_one_three": 4, "steane": 4, "shor": 3}
    assert all(r["optimal_qubits"] == r["expected"] for r in rows)
    lines = csv_file.read_text().splitlines()
    assert lines[0].startswith("code,n,k,t_star,optimal_qubits")
    assert len(lines) == 4
    assert plot_file.stat().st_size > 0


# ----------------------------------------------------------------- exit codes

def test_missing_code_source_is_input_error(capsys):
    assert main(["analyze"]) == 4
    assert "input error" in capsys.readouterr().err


def test_both_code_sources_is_input_error(tmp_path, capsys):
    code_file = write(tmp_path / "toy.json", TOY)
    rc = main(["analyze", "--code", code_file, "--builtin", "steane"])
    assert rc == 4


def test_unknown_builtin_is_input_error(capsys):
    assert main(["analyze", "--builtin", "nope"]) == 4
    assert "unknown builtin" in capsys.readouterr().err


def test_unknown_subcommand_is_input_error(capsys):
    assert main(["frobnicate"]) == 4


def test_no_subcommand_prints_help(capsys):
    assert main([]) == 4
    assert "analyze" in capsys.readouterr().out


def test_missing_file_is_input_error(capsys):
    assert main(["analyze", "--code", "/nonexistent/code.json"]) == 4


def test_bad_circuit_json_is_input_error(tmp_path, capsys):
    circ = write(tmp_path / "broken.json", "{not json")
    assert main(["verify", "--builtin", "steane", "--circuit", circ]) == 4


# -------------------------------------------------------------- tol overrides

def test_env_tol_applies_and_flag_wins(tmp_path, monkeypatch, capsys):
    """The five-qubit circuit carries harmless float noise around 1e-16, so
    an absurdly small env tolerance must fail it while --tol restores it."""
    circ_file = tmp_path / "five.json"
    assert main(["synthesize", "--builtin", "five_one_three",
                 "--out-circuit", str(circ_file)]) == 0
    monkeypatch.setenv("QSPACE_TOL", "1e-18")
    rc = main(["verify", "--builtin", "five_one_three",
               "--circuit", str(circ_file)])
    assert rc == 3
    rc = main(["verify", "--builtin", "five_one_three",
               "--circuit", str(circ_file), "--tol", "1e-8"])
    assert rc == 0
    capsys.readouterr()


def test_non_numeric_env_tol_is_input_error(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("QSPACE_TOL", "banana")
    assert main(["analyze", "--builtin", "five_one_three"]) == 4
    assert "QSPACE_TOL" in capsys.readouterr().err


# ------------------------------------------------------------- console script

def test_installed_entry_point_runs():
    exe = shutil.which("qspace")
    assert exe is not None
    proc = subprocess.run(
        [exe, "analyze", "--builtin", "five_one_three"],
        capture_output=True, text=True, timeout=120,
    )
    assert proc.returncode == 0
    assert "optimal live qubits = 4" in proc.stdout
