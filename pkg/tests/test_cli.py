import csv
import io
import json

import pytest

from cotypelab.cli import run
from cotypelab.tensors import Tensor3


def read(path):
    return json.loads(path.read_text())


@pytest.fixture
def hadamard_files(tmp_path):
    code, dec = tmp_path / "code.json", tmp_path / "dec.json"
    assert run(["code", "hadamard", "--m", "2", "-o", str(code), "--decoder-out", str(dec)]) == 0
    return code, dec


@pytest.fixture
def smoothed_file(tmp_path, hadamard_files):
    code, dec = hadamard_files
    out = tmp_path / "smoothed.json"
    assert run(["smooth", "--code", str(code), "--decoder", str(dec), "--theta", "1/16", "--phi", "1/16", "-o", str(out)]) == 0
    return out


def test_code_hadamard(tmp_path):
    out = tmp_path / "code.json"
    assert run(["code", "hadamard", "--m", "3", "-o", str(out)]) == 0
    obj = read(out)
    assert obj["n"] == 8 and obj["form"] == "walsh"
    assert obj["manifest"]["command"][:3] == ["lab", "code", "hadamard"]
    assert run(["code", "hadamard", "--m", "0", "-o", str(out)]) == 1


def test_code_quality(tmp_path, hadamard_files):
    code, dec = hadamard_files
    out = tmp_path / "q.json"
    assert run(["code", "quality", "--code", str(code), "--decoder", str(dec), "--phi", "1/4", "-o", str(out)]) == 0
    obj = read(out)
    assert obj["theta_margin"] == "0/1" and obj["regime"] == "exhaustive" and obj["guarantee"] is True
    assert run(["code", "quality", "--code", str(code), "--decoder", str(dec), "--phi", "1/4", "--budget", "3"]) == 1


def test_smooth_and_certify(tmp_path, smoothed_file, capsys):
    sm = read(smoothed_file)
    assert sm["three_n"] == 12 and all(b["J"] == 2 for b in sm["per_bit"])
    cert = tmp_path / "cert.json"
    args = ["certify", "--smoothed", str(smoothed_file), "--p", "3", "3", "3", "--q", "2",
            "--strategies", "rank_one", "diagonal", "slicing", "-o", str(cert)]
    assert run(args) == 0
    obj = read(cert)
    assert [w["L"] for w in obj["per_witness"]] == ["2/1", "2/1"]
    assert 0 < obj["value"] <= 1 and len(obj["per_sign"]) == 4
    again = tmp_path / "again.json"
    assert run(args[:-1] + [str(again)]) == 0
    a, b = read(cert), read(again)
    for key in ("per_witness", "alpha_min", "J_min", "inputs_hash", "value", "q"):
        assert a[key] == b[key]
    assert run(["certify", "--smoothed", str(smoothed_file), "--p", "2", "2", "2", "--q", "2"]) == 1
    assert "1/p1 + 1/p2 + 1/p3" in capsys.readouterr().err


def test_smooth_shortfall_goes_to_stderr(tmp_path, capsys):
    # a length-100 repetition code whose decoder reads one position: J = 1 < ceil(phi theta n / 9) = 3
    code, dec = tmp_path / "c.json", tmp_path / "d.json"
    code.write_text(json.dumps({"m": 1, "n": 100, "form": "explicit", "codewords": [[1] * 100, [-1] * 100]}))
    g = [1, -1, 1, -1, 1, -1, 1, -1]
    dec.write_text(json.dumps({"m": 1, "n": 100, "per_bit": [[{"i": 1, "j": 1, "k": 1, "g": g, "w": "1/1"}]]}))
    out = tmp_path / "s.json"
    assert run(["smooth", "--code", str(code), "--decoder", str(dec), "--theta", "7/16", "--phi", "7/16", "-o", str(out)]) == 0
    err = capsys.readouterr().err
    assert "warning" in err and "bit 1" in err
    assert read(out)["manifest"]["regimes"]["smoothing"]["shortfalls"]


def test_missing_file(capsys):
    assert run(["certify", "--smoothed", "missing.json", "--p", "3", "3", "3", "--q", "2"]) == 1
    assert "file not found" in capsys.readouterr().err


def test_malformed_json_names_byte_offset(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_bytes('{"n": 1, "é": [1,, 2]}'.encode())
    assert run(["tensor", "norm", "--file", str(bad), "--p", "3", "3", "3"]) == 1
    err = capsys.readouterr().err
    # the error sits at character 17; the two-byte e-acute shifts it to byte 18
    assert "byte offset 18" in err


def test_schema_violation_names_field_path(tmp_path, capsys):
    bad = tmp_path / "t.json"
    bad.write_text(json.dumps({"n": 1, "entries": [[1]]}))
    assert run(["tensor", "norm", "--file", str(bad), "--p", "3", "3", "3"]) == 1
    assert "$.entries[0]" in capsys.readouterr().err


def test_tensor_norm(tmp_path):
    T = tmp_path / "diag.json"
    T.write_text(json.dumps(Tensor3.diagonal([1, 1, 1, 1]).to_json()))
    out = tmp_path / "norm.json"
    assert run(["tensor", "norm", "--file", str(T), "--p", "3", "3", "3", "--lower", "diagonal_functional", "-o", str(out)]) == 0
    obj = read(out)
    assert obj["upper"]["exact"] == "4/1" and obj["lower"]["exact"] == "4/1"
    assert run(["--arithmetic", "float", "tensor", "norm", "--file", str(T), "--p", "3", "3", "3", "-o", str(out)]) == 0
    assert read(out)["upper"]["value"] == pytest.approx(4)
    assert run(["tensor", "norm", "--file", str(T), "--p", "1", "3", "3"]) == 1


def test_verify_suites(capsys):
    for suite in ("identities", "symmetrization", "sandwich"):
        assert run(["verify", "--suite", suite]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "PASS" in out


def test_bad_subcommand():
    assert run(["frobnicate"]) == 1
    assert run([]) == 1


def _certificate(tmp_path, smoothed_file, q, name):
    out = tmp_path / name
    assert run(["certify", "--smoothed", str(smoothed_file), "--p", "3", "3", "3", "--q", q,
                "--strategies", "slicing", "-o", str(out)]) == 0
    return out


def test_report_rows(tmp_path, smoothed_file, capsys):
    c3 = _certificate(tmp_path, smoothed_file, "3", "c3.json")
    c2 = _certificate(tmp_path, smoothed_file, "2", "c2.json")
    capsys.readouterr()
    assert run(["report", str(c3), str(c2)]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert [r["q"] for r in rows] == ["2/1", "3/1"]
    assert list(rows[0]) == ["m", "n", "p1", "p2", "p3", "q", "J_min", "alpha_min", "value", "runtime"]
    assert run(["report", str(c2)]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 2


def test_report_empty_and_mixed(tmp_path, smoothed_file, capsys):
    assert run(["report"]) == 0
    assert capsys.readouterr().out.strip() == "m,n,p1,p2,p3,q,J_min,alpha_min,value,runtime"
    assert run(["report", str(smoothed_file)]) == 1
    assert "mixed-schema" in capsys.readouterr().err


def test_report_sweep(tmp_path):
    out = tmp_path / "r.csv"
    assert run(["report", "--hadamard-sweep", "1", "2", "--q", "2", "3", "--strategies", "slicing", "-o", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert [(r["m"], r["q"]) for r in rows] == [("1", "2/1"), ("1", "3/1"), ("2", "2/1"), ("2", "3/1")]
    assert (tmp_path / "r.csv.manifest.json").exists()


def test_seed_from_environment(tmp_path, monkeypatch):
    out = tmp_path / "c.json"
    monkeypatch.setenv("LAB_SEED", "41")
    run(["code", "hadamard", "--m", "1", "-o", str(out)])
    assert read(out)["manifest"]["seed"] == 41
    run(["--seed", "5", "code", "hadamard", "--m", "1", "-o", str(out)])
    assert read(out)["manifest"]["seed"] == 5
    monkeypatch.setenv("LAB_SEED", "nope")
    assert run(["code", "hadamard", "--m", "1", "-o", str(out)]) == 1


def test_tampered_smoothed_code_is_an_invariant_failure(tmp_path, smoothed_file, capsys):
    obj = read(smoothed_file)
    obj["per_bit"][0]["biases"][0] = "9/16"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(obj))
    assert run(["certify", "--smoothed", str(bad), "--p", "3", "3", "3", "--q", "2"]) == 2
    assert "invariant violated (soundness)" in capsys.readouterr().err
