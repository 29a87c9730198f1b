from __future__ import annotations

import json
from pathlib import Path

import pytest

from obsmc import bench, cli

from conftest import BENCH_DIR


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------


def test_check_valid_file(capsys):
    code, out, _ = run_cli(capsys, "check", str(BENCH_DIR / "p2wr.cmp"))
    assert code == 0
    assert "ok: 2 processes" in out


def test_check_reports_cyclic_architecture(capsys):
    code, out, _ = run_cli(capsys, "check", "bench:cyclic3", "--n", "1")
    assert code == 0
    assert "cyclic" in out


def test_check_unmatched_acquire(tmp_path, capsys):
    bad = tmp_path / "bad.cmp"
    bad.write_text("lock l\nprocess p { acquire l }")
    code, _, err = run_cli(capsys, "check", str(bad))
    assert code == 3
    assert "not released" in err


def test_check_syntax_error_position(tmp_path, capsys):
    bad = tmp_path / "bad.cmp"
    bad.write_text("global x = 0\nprocess p { writ x }")
    code, _, err = run_cli(capsys, "check", str(bad))
    assert code == 3
    assert "2:" in err


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def test_run_dc_json_schema(capsys):
    code, out, _ = run_cli(capsys, "run", "bench:lastzero", "--n", "2",
                           "--algo", "dc-cyclic", "--json")
    assert code == 0
    doc = json.loads(out)
    assert set(doc) == {
        "program", "algo", "traces", "classes", "calls", "unrealizable",
        "time_ms", "violations", "complete",
    }
    assert doc["complete"] is True
    assert doc["violations"] == []
    assert doc["classes"] == 5


def test_run_dc_on_cyclic_architecture_is_input_error(capsys):
    code, _, err = run_cli(capsys, "run", "bench:cyclic3", "--n", "1", "--algo", "dc")
    assert code == 3
    assert "dc-cyclic" in err


def test_run_brute_p2wr_traces(capsys):
    code, out, _ = run_cli(capsys, "run", "bench:p2wr", "--algo", "brute", "--json")
    assert code == 0
    assert json.loads(out)["traces"] == 6


def test_run_violation_exit_code(capsys):
    code, out, _ = run_cli(capsys, "run", str(BENCH_DIR / "assert_racy.cmp"), "--json")
    assert code == 1
    doc = json.loads(out)
    assert doc["violations"] and doc["violations"][0]["assert_id"].startswith("p1")
    assert all(isinstance(e, int) for e in doc["violations"][0]["witness"])


def test_run_incomplete_exit_code(capsys):
    code, out, _ = run_cli(capsys, "run", "bench:opt_lock", "--n", "3",
                           "--algo", "dc", "--max-calls", "2", "--json")
    assert code == 2
    assert json.loads(out)["complete"] is False


def test_table_and_json_agree(capsys):
    code, table, _ = run_cli(capsys, "run", "bench:p2wr", "--algo", "dc")
    code2, raw, _ = run_cli(capsys, "run", "bench:p2wr", "--algo", "dc", "--json")
    doc = json.loads(raw)
    for key in ("traces", "classes", "calls"):
        line = next(l for l in table.splitlines() if l.startswith(key))
        assert int(line.split()[-1]) == doc[key]


# ---------------------------------------------------------------------------
# classes
# ---------------------------------------------------------------------------


def test_classes_p2wr(capsys):
    code, out, _ = run_cli(capsys, "classes", "bench:p2wr", "--json")
    assert code == 0
    doc = json.loads(out)
    assert doc["classes"]["obs"] == 3
    assert doc["classes"]["maz"] == 4
    assert doc["maximal_traces"] == 6


def test_classes_single_equiv(capsys):
    code, out, _ = run_cli(capsys, "classes", "bench:wr_chain", "--n", "3",
                           "--equiv", "maz")
    assert code == 0
    assert "mazurkiewicz" in out


def test_classes_empty_conflict_program(tmp_path, capsys):
    src = tmp_path / "free.cmp"
    src.write_text(
        "global x = 0\nglobal y = 0\nprocess p1 { write x = 1 }\nprocess p2 { write y = 1 }\n"
    )
    code, out, _ = run_cli(capsys, "classes", str(src), "--json")
    doc = json.loads(out)
    assert doc["classes"]["obs"] == 1
    assert doc["classes"]["maz"] == 1


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------


def test_bench_writes_table_csv_and_figures(tmp_path, capsys):
    out_dir = tmp_path / "rep"
    code, out, _ = run_cli(
        capsys, "bench", "--suite", "wr_chain", "--sizes", "2,3",
        "--out", str(out_dir),
    )
    assert code == 0
    assert "wr_chain" in out and "sleep" in out
    assert (out_dir / "bench.csv").exists()
    pngs = sorted(p.name for p in out_dir.glob("*.png"))
    assert pngs == ["bench_wr_chain_counts.png", "bench_wr_chain_time.png"]
    csv_text = (out_dir / "bench.csv").read_text().splitlines()
    assert csv_text[0] == "suite,size,algo,classes,traces,time_ms,complete"
    assert len(csv_text) == 5  # two sizes x two algorithms


def test_bench_json(tmp_path, capsys):
    code, out, _ = run_cli(
        capsys, "bench", "--suite", "p2wr", "--sizes", "0", "--algos", "dc",
        "--json", "--out", str(tmp_path / "rep"),
    )
    assert code == 0
    rows = json.loads(out)
    assert rows[0]["classes"] == 3


# ---------------------------------------------------------------------------
# emit
# ---------------------------------------------------------------------------


def test_emit_matches_generator(capsys):
    code, out, _ = run_cli(capsys, "emit", "bench:lastzero", "--n", "2")
    assert code == 0
    assert out == bench.generate("lastzero", 2)


def test_emit_unknown_name(capsys):
    code, _, err = run_cli(capsys, "emit", "bench:nope")
    assert code == 3
