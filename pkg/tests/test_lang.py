from __future__ import annotations

from pathlib import Path

import pytest

from obsmc import bench, lang
from obsmc.model import Acquire, Branch, LocalAssign, Read, Release, Write, program_structure_leq

from conftest import ALL_CORPUS, BENCH_DIR, corpus_source, load


# ---------------------------------------------------------------------------
# parse
# ---------------------------------------------------------------------------


def test_parse_minimal_process():
    ast = lang.parse("global x = 0\nprocess p1 { write x = 1  local r = 0  r = read x }")
    assert len(ast.processes) == 1
    assert len(ast.processes[0].body) == 3


def test_parse_lastzero_has_n_plus_one_processes():
    ast = lang.parse(bench.generate("lastzero", 3))
    assert len(ast.processes) == 4


def test_parse_repeat_keeps_loop_node():
    ast = lang.parse("global x = 0\nprocess p { repeat 2 { write x = 1 } }")
    (proc,) = ast.processes
    (stmt,) = proc.body
    assert isinstance(stmt, lang.SRepeat) and stmt.count == 2


def test_syntax_error_has_position():
    with pytest.raises(lang.ParseError) as exc:
        lang.parse("global x = 0\nprocess p { writ x = 1 }")
    assert exc.value.diag.line == 2
    assert "expected" in str(exc.value)


def test_duplicate_declaration():
    with pytest.raises(lang.ParseError, match="duplicate"):
        lang.parse("global x = 0\nglobal x = 1")


def test_undeclared_variable():
    with pytest.raises(lang.ParseError, match="undeclared"):
        lang.parse("process p { write x = 1 }")


def test_index_on_non_array():
    with pytest.raises(lang.ParseError, match="non-array"):
        lang.parse("global x = 0\nprocess p { write x[0] = 1 }")


def test_array_needs_index():
    with pytest.raises(lang.ParseError, match="index"):
        lang.parse("global a[2] = 0\nprocess p { write a = 1 }")


def test_lock_read_rejected():
    with pytest.raises(lang.ParseError, match="lock"):
        lang.parse("lock l\nprocess p { v = read l }")


# ---------------------------------------------------------------------------
# compile
# ---------------------------------------------------------------------------


def test_repeat_unrolls_to_sequential_writes():
    prog = lang.compile_source("global x = 0\nprocess p { repeat 2 { write x = 1 } }")
    writes = [e for e in prog.processes[0].edges if isinstance(e.label, Write)]
    assert len(writes) == 2
    assert program_structure_leq(prog, writes[0].eid, writes[1].eid)


def test_withdraw_shape_matches_published_example():
    # acquire, read, branch pair, write, release, read; the read before
    # the write is ordered by program structure.
    prog = load("withdraw")
    proc = prog.processes[0]
    kinds = [type(e.label).__name__ for e in proc.edges]
    assert kinds.count("Acquire") == 1
    assert kinds.count("Release") == 1
    assert kinds.count("Read") == 2
    assert kinds.count("Write") == 1
    assert kinds.count("Branch") == 2
    balance_read = next(
        e for e in proc.edges if isinstance(e.label, Read) and e.label.target == "v"
    )
    balance_write = next(e for e in proc.edges if isinstance(e.label, Write))
    assert program_structure_leq(prog, balance_read.eid, balance_write.eid)


def test_if_compiles_to_branching_node():
    prog = lang.compile_source(
        "global x = 0\nprocess p { local c = 1\nif c == 1 { write x = 1 } else { write x = 2 } }"
    )
    proc = prog.processes[0]
    branches = [e for e in proc.edges if isinstance(e.label, Branch)]
    writes = [e for e in proc.edges if isinstance(e.label, Write)]
    assert len(branches) == 2 and len(writes) == 2
    assert branches[0].src == branches[1].src


def test_assert_compiles_to_violation_sink():
    prog = lang.compile_source("global x = 0\nprocess p { v = read x\nassert v == 0 }")
    proc = prog.processes[0]
    sinks = [e for e in proc.edges if isinstance(e.label, Branch) and e.label.assert_id]
    assert len(sinks) == 1
    assert proc.out_edges(sinks[0].dst) == []


def test_branch_to_branch_contracted():
    src = """
global x = 0
process p {
  local c = 1
  if c == 1 {
  } else {
  }
  if c == 2 {
    write x = 1
  } else {
  }
}
"""
    prog = lang.compile_source(src)
    proc = prog.processes[0]
    out = {}
    for e in proc.edges:
        out.setdefault(e.src, []).append(e)
    for arms in out.values():
        if len(arms) >= 2:
            for arm in arms:
                assert len(out.get(arm.dst, [])) <= 1, "branching follows branching"


def test_unmatched_acquire_rejected():
    from obsmc.model import InputError

    with pytest.raises(InputError, match="not released"):
        lang.compile_source("lock l\nprocess p { acquire l }")


def test_init_writes_synthesized():
    prog = load("withdraw")
    assert len(prog.init_events) == 2  # balance and the lock
    assert prog.init_events[0].location_family() == "balance"
    assert prog.init_events[1].location_family() == "l"


# ---------------------------------------------------------------------------
# render round trips
# ---------------------------------------------------------------------------


def test_render_empty_program_header_only():
    prog = lang.compile_source("global x = 3")
    assert lang.render(prog) == "global x = 3\n"


@pytest.mark.parametrize("name", ALL_CORPUS)
def test_render_round_trip_corpus(name):
    prog = load(name)
    again = lang.compile_source(lang.render(prog), name)
    assert lang.isomorphic(prog, again)


def test_render_of_repeat_shows_unrolled_body():
    prog = lang.compile_source("global x = 0\nprocess p { repeat 2 { write x = 5 } }")
    text = lang.render(prog)
    assert text.count("write x = 5") == 2
    assert "repeat" not in text


def test_render_round_trip_contracted_branches():
    src = """
global x = 0
process p {
  local c = 1
  if c == 1 {
  } else {
  }
  if c == 2 {
    write x = 1
  } else {
    write x = 2
  }
}
"""
    prog = lang.compile_source(src)
    again = lang.compile_source(lang.render(prog))
    assert lang.isomorphic(prog, again)


# ---------------------------------------------------------------------------
# corpus files
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "stem, name, n",
    [
        ("p2wr", "p2wr", None),
        ("wr_chain_2", "wr_chain", 2),
        ("wr_chain_3", "wr_chain", 3),
        ("wr_chain_4", "wr_chain", 4),
        ("wr_grid_3", "wr_grid", 3),
        ("cyclic3_1", "cyclic3", 1),
        ("cyclic3_2", "cyclic3", 2),
        ("withdraw", "withdraw", None),
        ("lastzero_2", "lastzero", 2),
        ("lastzero_3", "lastzero", 3),
        ("opt_lock_2", "opt_lock", 2),
        ("opt_lock_4", "opt_lock", 4),
    ],
)
def test_bundled_files_match_generators(stem, name, n):
    assert corpus_source(stem) == bench.generate(name, n)


def test_generators_are_pure():
    assert bench.generate("lastzero", 3) == bench.generate("lastzero", 3)


def test_wr_grid_2_is_p2wr():
    assert bench.generate("wr_grid", 2) == bench.generate("p2wr")
