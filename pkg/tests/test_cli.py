import argparse
import json
import subprocess
import sys

import pytest

from cantorwin import cli


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_tseq(capsys):
    code, out, err = run(capsys, "cantor", "tseq", "--f", "9", "--r", "0,0:2")
    assert code == 0
    assert "t_0 = 7" in err
    assert json.loads(out)["t"][0] == "7"


def test_verify_rational_not_certified(capsys):
    code, out, _ = run(capsys, "verify", "bad", "--x", "1/2", "--Q", "10")
    assert code == 1
    rep = json.loads(out)
    assert rep["min_value"] == "0" and rep["status"] == "not_certified"


def test_missing_tree(capsys, tmp_path):
    code, _, err = run(capsys, "verify", "bad", "--tree", tmp_path / "nope.json")
    assert code == 2
    assert "not found" in err


def test_bad_kind(capsys):
    code, _, err = run(capsys, "structure", "info", "--kind", "bogus")
    assert code == 2 and "bogus" in err


def test_structure_verify_and_dim(capsys):
    code, out, _ = run(capsys, "structure", "verify", "--kind", "euclidean", "--n", 2, "--u", 2, "--v", 3)
    assert code == 0 and json.loads(out)["axioms"]["pass"]
    code, out, _ = run(capsys, "structure", "dim", "--kind", "middle-third")
    assert code == 0
    assert abs(json.loads(out)["dim"] - 0.6309297535714574) < 1e-12


def test_build_family_tree_schema(capsys, tmp_path):
    path = tmp_path / "tree.json"
    code, out, _ = run(capsys, "cantor", "build", "--family", "classical-bad", "--R", 20, "--depth", 5,
                       "--out", path, "--quiet")
    assert code == 0 and out == ""
    doc = json.loads(path.read_text())
    cli.validate(doc, "tree")
    assert len(doc["levels"]) == 6


def test_build_then_verify_bad(capsys, tmp_path):
    path = tmp_path / "tree.json"
    run(capsys, "cantor", "build", "--family", "classical-bad", "--R", 20, "--depth", 3, "--out", path,
        "--quiet")
    code, out, _ = run(capsys, "verify", "bad", "--tree", path, "--Q", 50)
    rep = json.loads(out)
    assert code == 0 and rep["positive"]


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"f": "9", "r": "0,0:2"}))
    code, out, _ = run(capsys, "cantor", "tseq", "--config", cfg)
    assert code == 0 and json.loads(out)["t"][0] == "7"
    code, out, _ = run(capsys, "cantor", "tseq", "--config", cfg, "--f", "10")
    assert json.loads(out)["t"][0] == "8"
    cfg.write_text("{bad json")
    code, _, _ = run(capsys, "cantor", "tseq", "--config", cfg)
    assert code == 2


def test_threads_env(monkeypatch):
    args = argparse.Namespace(threads=None, _config={})
    monkeypatch.setenv(cli.THREADS_ENV, "4")
    assert cli.threads(args) == 4
    args.threads = 2
    assert cli.threads(args) == 2
    monkeypatch.setenv(cli.THREADS_ENV, "x")
    with pytest.raises(Exception):
        cli.threads(argparse.Namespace(threads=None, _config={}))


def test_game_compile_replay(capsys, tmp_path):
    path = tmp_path / "g.json"
    code, out, _ = run(capsys, "game", "compile", "--avoid", "rationals", "--R", 10, "--depth", 4,
                       "--out", path)
    assert code == 0
    assert max(json.loads(out)["s_values"]) <= 3
    code, out, _ = run(capsys, "game", "replay", "--tree", path)
    assert code == 0 and json.loads(out)["pass"]


def test_game_oversized_exit(capsys, tmp_path):
    code, _, err = run(capsys, "game", "compile", "--avoid", "rationals", "--R", 10, "--depth", 3,
                       "--strategy", "oversized", "--out", tmp_path / "o.json")
    assert code == 1 and "LegalityBreach" in err


def test_game_play_transcript(capsys, tmp_path):
    path = tmp_path / "tr.json"
    code, _, _ = run(capsys, "game", "play", "--avoid", "rationals", "--rounds", 5, "--out", path, "--quiet")
    assert code == 0
    doc = json.loads(path.read_text())
    cli.validate(doc, "transcript")
    assert sum(m["player"] == "bob" for m in doc["moves"]) == 6


def test_plot_and_report(capsys, tmp_path):
    tree = tmp_path / "m.json"
    code, _, _ = run(capsys, "cantor", "build", "--kind", "middle-third", "--R", 3, "--depth", 4,
                     "--out", tree, "--quiet")
    assert code == 0
    svg, csvp, rep = tmp_path / "m.svg", tmp_path / "m.csv", tmp_path / "rep.json"
    code, _, _ = run(capsys, "plot", "--tree", tree, "--svg", svg, "--csv", csvp, "--report", rep, "--quiet")
    assert code == 0
    text = svg.read_text()
    level4 = text.split('data-level="4"')[1].split("</g>")[0]
    assert level4.count("<rect") == 16
    assert csvp.read_text().splitlines()[0].startswith("level")
    cli.validate(json.loads(rep.read_text()), "report")


def test_deterministic_output(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        run(capsys, "cantor", "build", "--kind", "euclidean", "--R", 4, "--depth", 3, "--oracle", "seeded",
            "--seed", 3, "--s", "1", "--out", p, "--quiet")
    assert a.read_bytes() == b.read_bytes()


def test_module_entry():
    res = subprocess.run([sys.executable, "-m", "cantorwin", "structure", "dim", "--kind", "middle-third"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and '"dim"' in res.stdout
