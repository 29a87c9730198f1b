from __future__ import annotations

from pathlib import Path

import pytest

from obsmc import lang

BENCH_DIR = Path(__file__).resolve().parent.parent / "benchmarks"

# Acyclic desk corpus: at most 3 processes, at most 8 global events per
# process, all architectures acyclic.
ACYCLIC_CORPUS = [
    "p2wr",
    "wr_chain_2",
    "wr_chain_3",
    "wr_chain_4",
    "withdraw",
    "opt_lock_2",
    "two_readers",
    "chain3",
    "star3",
    "locks_cs",
    "locks_ping",
    "branch_on_read",
    "array_cells",
    "array_dyn",
    "assert_safe",
    "assert_racy",
    "init_race",
    "rw_pair",
]

CYCLIC_CORPUS = ["tiny_triangle", "wr_grid_3", "lastzero_2", "cyclic3_1"]

ALL_CORPUS = ACYCLIC_CORPUS + CYCLIC_CORPUS


def corpus_source(name: str) -> str:
    return (BENCH_DIR / f"{name}.cmp").read_text()


def load(name: str):
    return lang.compile_source(corpus_source(name), name)


@pytest.fixture(scope="session")
def programs():
    return {name: load(name) for name in ALL_CORPUS}
