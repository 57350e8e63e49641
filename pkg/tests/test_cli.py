import json
import subprocess
import sys
from pathlib import Path

import pytest

from mdlrnn.cli import UsageError, main, parse_config
from mdlrnn.genome import COMPACT, encode_network, read_genome_file
from mdlrnn.refnets import reference_network
from mdlrnn.tasks import TaskKind, read_corpus

ROOT = Path(__file__).resolve().parents[1]
SMOKE = ROOT / "configs" / "smoke.cfg"
REFS = Path(__file__).parent / "fixtures" / "refs"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_config_parsing():
    cfg = parse_config(SMOKE.read_text())
    assert cfg.ga.population_size == 20 and cfg.island_count == 2 and cfg.migration_minutes is None
    cfg = parse_config(SMOKE.read_text(), {"extended": "yes", "seed": "9"})
    assert cfg.ga.extended and cfg.base_seed == 9
    with pytest.raises(UsageError, match="unknown config key"):
        parse_config(SMOKE.read_text() + "mystery = 1\n")
    with pytest.raises(UsageError, match="missing config key: seed"):
        parse_config("\n".join(l for l in SMOKE.read_text().splitlines() if not l.startswith("seed")))
    for name in ("desk.cfg", "full.cfg"):
        parse_config((ROOT / "configs" / name).read_text())


def test_gen_corpus_and_eval(tmp_path, capsys):
    train = tmp_path / "train.txt"
    code, out, _ = run(capsys, "gen-corpus", "--task", "anbn", "--size", "50", "--seed", "3", "--out", train)
    assert code == 0 and "wrote 50 sequences" in out
    k = read_corpus(train).meta["k"]
    test = tmp_path / "test.txt"
    code, _, _ = run(capsys, "gen-corpus", "--task", "anbn", "--size", "1", "--split", "test", "--k", k, "--out", test)
    assert code == 0 and len(read_corpus(test)) == 1001
    code, out, _ = run(capsys, "eval", "--genome", REFS / "anbn.genome", "--corpus", test)
    lines = out.splitlines()
    assert code == 0 and lines[0].startswith("task\tset")
    assert lines[1].split("\t")[4] == "100.00%"


def test_evolve_writes_outputs(tmp_path, capsys):
    corpus = tmp_path / "c.txt"
    run(capsys, "gen-corpus", "--task", "anbn", "--size", "20", "--out", corpus)
    out_dir = tmp_path / "run"
    code, out, _ = run(capsys, "evolve", "--corpus", corpus, "--config", SMOKE, "--out", out_dir, "--set", "generations=4")
    assert code == 0 and out.startswith("G=")
    assert (out_dir / "report.txt").read_text().strip() == out.strip()
    assert read_genome_file(out_dir / "best.genome").n_inputs == 3
    log = (out_dir / "logs" / "island_0000.tsv").read_text().splitlines()
    assert log[0].startswith("generation") and len(log) == 6
    assert len(list((out_dir / "checkpoints").glob("island_*.json"))) == 2
    # continuing from the checkpoints
    code, _, _ = run(capsys, "evolve", "--corpus", corpus, "--config", SMOKE, "--out", out_dir, "--resume", "--set", "generations=6")
    assert code == 0
    assert len((out_dir / "logs" / "island_0000.tsv").read_text().splitlines()) == 8


def test_trace_encode_decode_dot(tmp_path, capsys):
    code, out, _ = run(capsys, "trace", "--genome", REFS / "anbn.genome", "--task", "anbn", "--sequence", "#ab", "--exact")
    assert code == 0
    rows = [l.split("\t") for l in out.splitlines()]
    assert rows[0][:3] == ["t", "input", "u0"] and rows[2][1] == "a" and rows[2][8] == "1/2"
    code, bits, _ = run(capsys, "encode", "--genome", REFS / "anbn.genome")
    assert bits.strip() == encode_network(reference_network(TaskKind.ANBN))
    code, text, _ = run(capsys, "decode", "--bits", bits.strip(), "--inputs", 3, "--outputs", 3)
    assert code == 0 and text.startswith("network inputs=3 outputs=3")
    txt = tmp_path / "n.txt"
    txt.write_text(text)
    code, dot, _ = run(capsys, "export-dot", "--genome", txt)
    assert code == 0 and dot.startswith("digraph")
    code, out, _ = run(capsys, "trace", "--genome", REFS / "addition.genome", "--task", "addition", "--sequence", "3,5")
    assert code == 0 and len(out.splitlines()) == 5


def test_compact_scheme_from_cli(tmp_path, capsys):
    txt = tmp_path / "f.txt"
    txt.write_text("network inputs=2 outputs=1\nunit 0 linear\n  -> 2 +1/2 forward\nunit 1 linear\n  -> 2 +2/1 recurrent\nunit 2 sigmoid\n")
    code, bits, _ = run(capsys, "encode", "--genome", txt, "--scheme", "compact")
    assert code == 0 and bits.startswith("11011")
    net = read_genome_file(REFS / "anbn.genome")
    with pytest.raises(Exception):
        encode_network(net, COMPACT)


def test_verify_ref(capsys):
    code, out, _ = run(capsys, "verify-ref", "--task", "anbn", "--n-max", 30, "--json")
    assert code == 0 and json.loads(out)["passed"]
    code, out, _ = run(capsys, "verify-ref", "--task", "anbn", "--n-max", 5, "--margin", "1e-12")
    assert code == 2 and "FAIL" in out
    code, out, _ = run(capsys, "verify-ref", "--task", "addition", "--n-max", 31)
    assert code == 0 and "accuracy=100.00%" in out


def test_export_refs(tmp_path, capsys):
    code, _, _ = run(capsys, "export-refs", "--out", tmp_path)
    assert code == 0
    for f in REFS.iterdir():
        assert (tmp_path / f.name).read_bytes() == f.read_bytes()


def test_exit_codes(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["gen-corpus", "--task", "nope", "--size", "1", "--out", "x"])
    assert exc.value.code == 1
    code, _, err = run(capsys, "gen-corpus", "--task", "anbn", "--size", "0", "--out", tmp_path / "x")
    assert code == 1 and "--size" in err
    bad = tmp_path / "bad.genome"
    bad.write_bytes(b"\xff\xff")
    code, _, err = run(capsys, "encode", "--genome", bad)
    assert code == 2 and "malformed" in err
    code, _, err = run(capsys, "eval", "--genome", REFS / "addition.genome", "--corpus", tmp_path / "missing.txt")
    assert code == 2
    code, _, _ = run(capsys, "decode", "--bits", "0101x", "--inputs", 1, "--outputs", 1)
    assert code == 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "mdlrnn", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "verify-ref" in res.stdout
