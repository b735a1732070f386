import csv
import io
import json

import pytest

from bcslab.cli import run


def _rows(capsys):
    out = capsys.readouterr().out
    return list(csv.DictReader(io.StringIO(out)))


@pytest.fixture
def const_w(tmp_path):
    p = tmp_path / "fields.txt"
    p.write_text("W 0 0 0.5 0\n")
    return p


def test_tc_example(capsys):
    code = run(["tc", "--potential", "gaussian:v=5,s=1", "--mu", "1", "--lambda", "1",
                "--ell-max", "2"])
    assert code == 0
    (row,) = _rows(capsys)
    assert float(row["tc"]) == pytest.approx(1.3862483087510031, rel=1e-6)
    assert row["channel"] == "0"
    assert float(row["bracket_lo"]) <= float(row["tc"]) <= float(row["bracket_hi"])


def test_dc_example(capsys, const_w):
    assert run(["dc", "--fields", str(const_w), "--lambda1", "2", "--lambda2", "1"]) == 0
    (row,) = _rows(capsys)
    assert float(row["D_c"]) == pytest.approx(1.0, abs=1e-12)


def test_verify_single_suite(capsys):
    assert run(["verify", "--suite", "m-mu-asymptotics"]) == 0
    cap = capsys.readouterr()
    assert "PASS" in cap.err
    assert "PASS" in cap.out


def test_zero_range_rows(capsys):
    assert run(["zerorange", "--a=-1", "--mu", "1", "--T", "0.05,0.1"]) == 0
    rows = _rows(capsys)
    assert float(rows[0]["value"]) == pytest.approx(0.1280485, rel=1e-6)
    assert float(rows[2]["value"]) > float(rows[3]["value"]) > 0


def test_mmu_and_scatlen(capsys):
    assert run(["mmu", "--mu", "1", "--T", "0.1"]) == 0
    assert len(_rows(capsys)) == 1
    assert run(["scatlen", "--potential", "square_well:v=1,R=1"]) == 0
    (row,) = _rows(capsys)
    assert float(row["a"]) == pytest.approx(1 - 1.5574077246549023, rel=1e-10)


@pytest.mark.parametrize("argv,code", [
    (["zerorange", "--a", "1"], 2),
    (["scatlen", "--potential", "square_well:v=3,R=1"], 2),
    (["dc", "--fields", "/nonexistent/fields.txt", "--lambda1", "1", "--lambda2", "1"], 4),
    (["tc", "--potential", "gaussian:v=5,s=1", "--lambda", "1,1"], 4),
    (["tc", "--potential", "gaussian:v=5,s=1", "--mu", "nan"], 4),
    (["tc", "--potential", "nosuch:v=1"], 4),
    (["verify", "--suite", "nosuch"], 4),
    (["frobnicate"], 4),
    ([], 4),
])
def test_exit_codes(argv, code, capsys):
    assert run(argv) == code
    if code:
        assert capsys.readouterr().err


def test_accuracy_exit_code(tmp_path, capsys):
    p = tmp_path / "f.txt"
    p.write_text("W 3 40 0\n")
    assert run(["dc", "--fields", str(p), "--lambda1", "1", "--lambda2", "1",
                "--modes", "2"]) == 3


def test_config_file(tmp_path, capsys, const_w):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"fields = {const_w}\nlambda1 = 2\n# comment\nlambda2 = 1\nno_check = false\n")
    assert run(["dc", "--config", str(cfg)]) == 0
    assert float(_rows(capsys)[0]["D_c"]) == pytest.approx(1.0)
    # flags override config values
    assert run(["dc", "--config", str(cfg), "--lambda2", "2"]) == 0
    assert float(_rows(capsys)[0]["D_c"]) == pytest.approx(0.5)


def test_config_unknown_key(tmp_path, capsys, const_w):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(f"fields = {const_w}\nlambda1 = 2\nlambda2 = 1\ncolour = red\n")
    assert run(["dc", "--config", str(cfg)]) == 4


def test_output_and_manifest(tmp_path, capsys):
    out = tmp_path / "tc.csv"
    argv = ["tc", "--potential", "gaussian:v=5,s=1", "--lambda", "0.8,1", "--ell-max", "0",
            "--output", str(out)]
    assert run(argv) == 0
    first = out.read_bytes()
    rec = json.loads((tmp_path / "tc.csv.manifest.jsonl").read_text().splitlines()[-1])
    assert rec["command"] == "tc" and rec["exit_code"] == 0 and rec["rows"] == 2
    assert rec["inputs"]["coupling"] == [0.8, 1.0]
    assert "rtol" in json.dumps(rec["tolerances"])
    assert set(rec["versions"]) >= {"bcslab", "numpy", "scipy"}
    # determinism
    assert run(argv) == 0
    assert out.read_bytes() == first
    rows = list(csv.DictReader(io.StringIO(first.decode())))
    assert [float(r["lambda"]) for r in rows] == [0.8, 1.0]
    assert all(len(r["tc"].replace("-", "").replace(".", "").split("e")[0]) >= 15 for r in rows)


@pytest.mark.slow
def test_workers_match_serial(tmp_path):
    base = ["glmin", "--fields", "{}", "--lambda1", "1", "--lambda2", "1", "--lambda3", "1",
            "--D=-0.5,0.5,1.0", "--modes", "3"]
    f = tmp_path / "f.txt"
    f.write_text("W 1 0 0.2 0\n")
    base[2] = str(f)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(base + ["--output", str(a)]) == 0
    assert run(base + ["--output", str(b), "--workers", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = list(csv.DictReader(io.StringIO(a.read_text())))
    assert [r["trivial"] for r in rows] == ["true", "false", "false"]
