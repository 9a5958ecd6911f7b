import subprocess
import sys

import pytest

from cplab import gf2
from cplab.circuits import dumps_circuit, naive_mm_circuit
from cplab.cli import main

from _support import drop_wire


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def kv(out: str) -> dict[str, str]:
    return dict(l.split("=", 1) for l in out.splitlines() if "=" in l and not l.startswith("#"))


def test_simulate_register(capsys):
    code, out, _ = run(capsys, "simulate", "--ds", "register", "--k", "4", "--n", "4",
                       "--script", "P,U2,Q1,Q3", "--trace")
    r = kv(out)
    assert code == 0 and r["status"] == "PASS"
    assert (r["t_u_max"], r["t_q_max"], r["config.seed"]) == ("1", "2", "0")
    assert "op#1 W @0x1" in out


def test_simulate_is_deterministic(capsys):
    a = run(capsys, "simulate", "--ds", "prefix-sum", "--n", "8", "--seed", "4", "--script", "P,Q1,Q2,Q3,U1,Q8")
    b = run(capsys, "simulate", "--ds", "prefix-sum", "--n", "8", "--seed", "4", "--script", "P,Q1,Q2,Q3,U1,Q8")
    assert a == b


def test_check_copycell_names_cell(capsys):
    code, out, _ = run(capsys, "check", "--ds", "copycell", "--trials", "64")
    r = kv(out)
    assert code == 1
    assert r["query-nonadaptive"] == "PASS" and r["memoryless"] == "FAIL"
    assert (r["memoryless.update"], r["memoryless.cell"], r["memoryless.depends_on"]) == ("2", "2", "1")
    assert r["violated"] == "memoryless"
    assert r["repro"].startswith("cpl check ") and "--seed 0" in r["repro"]


def test_check_bitset_passes(capsys):
    code, out, _ = run(capsys, "check", "--ds", "bitset", "--which", "memoryless")
    assert code == 0 and kv(out)["memoryless"] == "PASS"


@pytest.mark.parametrize("argv, length", [
    (["--protocol", "indexing", "--ds", "colcopy", "--k", "8", "--n", "8"], "136"),
    (["--protocol", "indexing", "--ds", "register", "--k", "4", "--n", "4"], "72"),
    (["--protocol", "disjointness", "--ds", "bitset", "--n", "8"], "48"),
    (["--protocol", "mm", "--d", "3"], "18"),
])
def test_encode_verify(capsys, argv, length):
    code, out, _ = run(capsys, "encode-verify", "--trials", "3", "--hex", *argv)
    r = kv(out)
    assert code == 0 and r["length"] == length and r["status"] == "PASS"
    assert len(r["message_hex"]) * 4 >= int(length)


def test_encode_verify_bad_circuit(capsys, tmp_path):
    path = tmp_path / "bad.d2"
    c = naive_mm_circuit(2)
    path.write_text(dumps_circuit(drop_wire(c, 0, c.middle[0].inputs[0])))
    code, out, _ = run(capsys, "encode-verify", "--protocol", "mm", "--d", "2", "--circuit", str(path))
    assert code == 1 and "NotMatrixMultiplication" in out


def test_encode_verify_wrong_ds(capsys):
    code, _, err = run(capsys, "encode-verify", "--protocol", "indexing", "--ds", "bitset")
    assert code == 2 and "error:" in err


def test_compile_roundtrip(capsys, tmp_path):
    code, out, _ = run(capsys, "compile", "--to", "circuit", "--prefix-sum", "8",
                       "--output", str(tmp_path / "c.d2"))
    r = kv(out)
    assert code == 0 and r["wires"] == "45" and r["size_bound"] == "56"
    assert (r["t_u_avg"], r["t_q_avg"]) == ("4", "13/8")
    code, out, _ = run(capsys, "compile", "--to", "ds", "--circuit", str(tmp_path / "c.d2"),
                       "--output", str(tmp_path / "ds"))
    assert code == 0 and kv(out)["wires"] == "45"
    V = gf2.read_matrix(tmp_path / "ds.V.mat")
    Q = gf2.read_matrix(tmp_path / "ds.Q.mat")
    code, out, _ = run(capsys, "compile", "--to", "circuit", "--V", str(tmp_path / "ds.V.mat"),
                       "--Q", str(tmp_path / "ds.Q.mat"))
    assert code == 0 and V.shape == (15, 8) and Q.shape == (8, 15)


@pytest.mark.parametrize("mode, wires", [("exhaustive", "4"), ("greedy", "4")])
def test_factorize_ones(capsys, tmp_path, mode, wires):
    p = tmp_path / "f.mat"
    gf2.write_matrix(p, gf2.BitMatrix.ones(2, 2))
    code, out, _ = run(capsys, "factorize", "--input", str(p), "--mode", mode, "--s-max", "2")
    assert code == 0
    assert out.splitlines()[next(i for i, l in enumerate(out.splitlines()) if l.startswith("wires="))] == f"wires={wires} s=1"
    assert "Q:" in out and "V:" in out


def test_factorize_no_solution_reports_trivial(capsys, tmp_path):
    p = tmp_path / "f.mat"
    gf2.write_matrix(p, gf2.BitMatrix.identity(3))
    code, out, _ = run(capsys, "factorize", "--input", str(p), "--mode", "exhaustive", "--s-max", "2")
    assert code == 1 and "wires=6 s=3" in out


def test_factorize_parse_error(capsys, tmp_path):
    p = tmp_path / "f.mat"
    p.write_text("2 2\n10\n1\n")
    code, _, err = run(capsys, "factorize", "--input", str(p))
    assert code == 2 and "line 3" in err


def test_gen_and_analyze(capsys, tmp_path):
    out_path = tmp_path / "g.mat"
    code, out, _ = run(capsys, "gen-operator", "grid-lines", "--p", "3", "--output", str(out_path))
    assert code == 0 and kv(out)["ones"] == "27"
    code, out, _ = run(capsys, "analyze", "--input", str(out_path))
    r = kv(out)
    assert code == 0 and r["pairwise_max"] == "1" and r["incidences"] == "27"
    assert r["discrepancy"].startswith("exact:")


def test_gen_incidence_from_geometry(capsys, tmp_path):
    g = tmp_path / "pts.geo"
    g.write_text("DIM 1\nPOINT 0\nPOINT 2\nPOINT 5\nBOX 0 2\nHALFSPACE -1 -2\n")
    code, out, _ = run(capsys, "gen-operator", "incidence", "--geometry", str(g))
    assert code == 0 and "110" in out.splitlines() and "011" in out.splitlines()
    code, out, _ = run(capsys, "analyze", "--geometry", str(g))
    assert code == 0


def test_gen_incidence_bad_geometry(capsys, tmp_path):
    g = tmp_path / "pts.geo"
    g.write_text("DIM 1\nPOINT x\n")
    code, _, err = run(capsys, "gen-operator", "incidence", "--geometry", str(g))
    assert code == 2 and "line 2" in err


def test_audit_mm(capsys):
    code, out, _ = run(capsys, "audit-mm", "--d", "4")
    r = kv(out)
    assert code == 0 and r["size"] == "192" and r["column_sum"] == "128"
    assert r["column.1"] == "t_u=16 t_q=16 sum=32"


def test_missing_file_and_bad_args(capsys):
    code, _, err = run(capsys, "analyze", "--input", "/no/such/file")
    assert code == 2 and "error:" in err
    with pytest.raises(SystemExit) as e:
        main(["simulate", "--ds", "nope"])
    assert e.value.code == 2


def test_threads_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("CPL_THREADS", "2")
    _, out, _ = run(capsys, "audit-mm", "--d", "2")
    assert kv(out)["config.threads"] == "2"


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "cplab.cli", "audit-mm", "--d", "2"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "status=PASS" in proc.stdout


def test_documented_invocations(capsys, tmp_path):
    code, out, _ = run(capsys, "encode-verify", "--protocol", "disjointness", "--ds", "bitset",
                       "--n", "8", "--w", "8", "--seed", "7")
    r = kv(out)
    assert code == 0 and (r["status"], r["length"], r["bound"]) == ("PASS", "48", "8")
    ones = tmp_path / "ones2x2.mat"
    ones.write_text("2 2\n11\n11\n")
    code, out, _ = run(capsys, "factorize", "--input", str(ones), "--mode", "exhaustive", "--s-max", "2")
    assert code == 0 and "wires=4 s=1" in out.splitlines()
    grid = tmp_path / "grid3.mat"
    run(capsys, "gen-operator", "grid-lines", "--p", "3", "--output", str(grid))
    code, out, _ = run(capsys, "analyze", "--input", str(grid))
    assert code == 0 and kv(out)["pairwise_max"] == "1"
