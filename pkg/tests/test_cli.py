import json
import subprocess
import sys
from pathlib import Path

import pytest

from obdarew import cli
from obdarew import manifest as mf
from obdarew.formats import load_tbox, parse_mapping, parse_queries

FIX = Path(__file__).parent / "fixtures"
BANK = FIX / "bank"


def bank_args(*extra):
    return ["--tbox", str(BANK / "tbox.txt"), "--mapping", str(BANK / "mapping.hl"),
            "--schema", str(BANK / "schema.txt"), *extra]


@pytest.fixture
def recursive(tmp_path):
    (tmp_path / "t.txt").write_text("role R\nA <= forall R . A\n")
    (tmp_path / "m.hl").write_text("A(x) :- V(x)\nR(x,y) :- W(x,y)\n")
    (tmp_path / "s.txt").write_text("V/1\nW/2\n")
    return ["--tbox", str(tmp_path / "t.txt"), "--mapping", str(tmp_path / "m.hl"),
            "--schema", str(tmp_path / "s.txt")]


def test_rewrite_writes_outputs_and_manifest(tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["rewrite", *bank_args("--lowlevel", str(BANK / "lowlevel.sql"), "--out", str(out))]) == 0
    assert "rewriting" in capsys.readouterr().out
    names = {p.name for p in out.iterdir()}
    assert names == {"tbox.dllite", "mapping.hl", "mapping.sql.txt", "manifest.json"}
    m = json.loads((out / "manifest.json").read_text())
    assert m["command"] == "rewrite" and m["label"] == "rewriting"
    assert m["parameters"]["k"] == 5 and m["k"] == 5
    assert set(m["inputs"]) == {"tbox", "mapping", "schema", "lowlevel"}
    assert mf.verify_digests({"inputs": {"tbox": m["inputs"]["tbox"]}}, BANK)
    load_tbox((out / "tbox.dllite").read_text())
    parse_mapping((out / "mapping.hl").read_text())


def test_verbose_flag_in_either_position(tmp_path):
    assert cli.main(["-v", "rewrite", *bank_args("--out", str(tmp_path / "a"))]) == 0
    assert cli.main(["rewrite", "-v", *bank_args("--out", str(tmp_path / "b"))]) == 0
    assert (tmp_path / "a" / "mapping.hl").read_text() == (tmp_path / "b" / "mapping.hl").read_text()


def test_approx(tmp_path):
    out = tmp_path / "g.dllite"
    assert cli.main(["approx", "--mode", "gsa", "--tbox", str(BANK / "tbox.txt"), "--out", str(out)]) == 0
    assert "inNameOf <= inNameOf" in out.read_text()
    m = json.loads((tmp_path / "g.dllite.manifest.json").read_text())
    assert m["command"] == "approx" and m["parameters"] == {"mode": "gsa"}


def test_expand(tmp_path, capsys):
    assert cli.main(["expand", *bank_args("--predicate", "SAcc", "--out", str(tmp_path))]) == 0
    text = capsys.readouterr().out
    assert parse_queries(text)
    assert "V_CAcc(x)" in text
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["verdicts"] == {"SAcc": "bounded"} and m["bounded"]


def test_eval(tmp_path, capsys):
    args = bank_args("--facts", str(BANK / "facts.txt"), "--queries", str(BANK / "queries.txt"))
    assert cli.main(["eval", *args, "--out", str(tmp_path)]) == 0
    rows = [line.split("\t") for line in capsys.readouterr().out.splitlines()]
    assert rows[0] == ["q(x) :- SAcc(x)", "1", "complete", "(8)"]
    assert (tmp_path / "answers.tsv").exists()


def test_eval_from_csv(tmp_path, capsys):
    d = tmp_path / "csv"
    d.mkdir()
    (d / "V_CAcc.csv").write_text("8\n")
    (d / "V_inNameOf.csv").write_text("8,jo\n")
    (d / "V_Person.csv").write_text("jo\n")
    args = bank_args("--facts-csv", str(d), "--queries", str(BANK / "queries.txt"), "--method", "chase")
    assert cli.main(["eval", *args]) == 0
    assert "\t1\tcomplete\t(8)" in capsys.readouterr().out.splitlines()[0]


def test_check_insep_against_rewriting(tmp_path, capsys):
    out = tmp_path / "rw"
    cli.main(["rewrite", *bank_args("--out", str(out))])
    capsys.readouterr()
    rc = cli.main(["check-insep", "--tbox1", str(BANK / "tbox.txt"), "--mapping1", str(BANK / "mapping.hl"),
                   "--tbox2", str(out / "tbox.dllite"), "--mapping2", str(out / "mapping.hl"),
                   "--schema", str(BANK / "schema.txt"), "--facts", str(BANK / "facts.txt"),
                   "--out", str(tmp_path / "rep")])
    assert rc == 0
    assert capsys.readouterr().out.splitlines()[-1] == "verdict: equal"
    rep = json.loads((tmp_path / "rep" / "report.json").read_text())
    assert rep["verdict"] == "equal" and rep["depth_sufficient"]
    m = json.loads((tmp_path / "rep" / "manifest.json").read_text())
    assert m["verdict"] == "equal"


def test_bad_input_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("A <= B or C\n")
    rc = cli.main(["rewrite", "--tbox", str(bad), "--mapping", str(BANK / "mapping.hl"),
                   "--schema", str(BANK / "schema.txt"), "--out", str(tmp_path / "o")])
    assert rc == 2
    assert capsys.readouterr().err.startswith("error: 1:1:")
    assert cli.main(["eval", *bank_args("--queries", str(BANK / "queries.txt"))]) == 2
    assert cli.main(["rewrite", *bank_args("--out", str(tmp_path / "o"), "--oracle", "magic")]) == 2
    assert cli.main(["approx", "--mode", "lsa", "--tbox", str(tmp_path / "missing"), "--out", "x"]) == 2


def test_cap_exceeded_exits_3(recursive, tmp_path, capsys):
    rc = cli.main(["expand", *recursive, "--predicate", "A", "--oracle", "unknown", "--cap", "1", "--k", "4"])
    assert rc == 3
    assert "cap" in capsys.readouterr().err
    rc = cli.main(["rewrite", *recursive, "--oracle", "unknown", "--cap", "1", "--out", str(tmp_path / "o")])
    assert rc == 3


def test_oracle_file(recursive, tmp_path, capsys):
    (tmp_path / "oracle.txt").write_text("A: bounded\n    q(x) :- V(x)\n")
    rc = cli.main(["rewrite", *recursive, "--oracle", f"file:{tmp_path / 'oracle.txt'}",
                   "--out", str(tmp_path / "o")])
    assert rc == 0
    m = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert m["verdicts"]["A"] == "bounded"
    assert "oracle" in m["inputs"]


def test_internal_error_exits_4(monkeypatch, tmp_path, capsys):
    def boom(a):
        raise RuntimeError("boom")
    monkeypatch.setattr(cli, "cmd_rewrite", boom)
    assert cli.main(["rewrite", *bank_args("--out", str(tmp_path))]) == 4
    assert "internal error" in capsys.readouterr().err


def test_argument_errors_exit_2():
    with pytest.raises(SystemExit) as e:
        cli.main(["rewrite", *bank_args("--out", "x", "--k", "0")])
    assert e.value.code == 2


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "obdarew", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    assert "check-insep" in r.stdout
