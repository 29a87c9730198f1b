from __future__ import annotations

import pytest

from obsmc import lang, oracle
from obsmc.execution import replay
from obsmc.explore import ExploreConfig, explore
from obsmc.model import all_but_two_cycle_set, build_communication_graph

from conftest import ACYCLIC_CORPUS, ALL_CORPUS, load


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------


def test_single_process_one_trace():
    prog = lang.compile_source("global x = 0\nprocess p { write x = 1\nv = read x }")
    assert len(oracle.enumerate_maximal_traces(prog)) == 1


def test_p2wr_six_traces():
    assert len(oracle.enumerate_maximal_traces(load("p2wr"))) == 6


def test_two_independent_single_event_processes():
    src = "global x = 0\nglobal y = 0\nprocess p1 { write x = 1 }\nprocess p2 { write y = 1 }"
    assert len(oracle.enumerate_maximal_traces(lang.compile_source(src))) == 2


def test_cap_exceeded():
    with pytest.raises(oracle.CapExceeded):
        oracle.enumerate_maximal_traces(load("opt_lock_2"), cap=5)


def test_enumerated_traces_replay_to_themselves():
    prog = load("locks_cs")
    for t in oracle.enumerate_maximal_traces(prog):
        again = replay(prog, t.global_projection())
        assert again.global_projection() == t.global_projection()
        assert again.observation() == t.observation()


def test_enumeration_deterministic():
    prog = load("withdraw")
    a = [t.global_projection() for t in oracle.enumerate_maximal_traces(prog)]
    b = [t.global_projection() for t in oracle.enumerate_maximal_traces(prog)]
    assert a == b


# ---------------------------------------------------------------------------
# partitions
# ---------------------------------------------------------------------------


def test_p2wr_partition_counts():
    traces = oracle.enumerate_maximal_traces(load("p2wr"))
    assert oracle.partition(traces, "mazurkiewicz").count == 4
    assert oracle.partition(traces, "observation").count == 3


def test_partition_classes_disjoint_and_exhaustive():
    traces = oracle.enumerate_maximal_traces(load("withdraw"))
    part = oracle.partition(traces, "observation")
    assert part.total_traces == len(traces)


def test_refined_between_observation_and_mazurkiewicz():
    prog = load("cyclic3_1")
    cut = all_but_two_cycle_set(build_communication_graph(prog))
    parts, total = oracle.partition_stream(
        prog,
        {
            "obs": ("observation", None),
            "obsx": ("observation-refined", cut),
            "maz": ("mazurkiewicz", None),
        },
    )
    assert parts["obs"].count <= parts["obsx"].count <= parts["maz"].count


@pytest.mark.parametrize("name", ALL_CORPUS)
def test_refinement_chain_and_nesting(name):
    prog = load(name)
    cut = all_but_two_cycle_set(build_communication_graph(prog))
    parts, total = oracle.partition_stream(
        prog,
        {
            "obs": ("observation", None),
            "obsx": ("observation-refined", cut),
            "maz": ("mazurkiewicz", None),
        },
    )
    assert parts["obs"].count <= parts["obsx"].count <= parts["maz"].count
    # every reordering class sits inside exactly one observation class
    traces = oracle.enumerate_maximal_traces(prog)
    from obsmc.explore import mazurkiewicz_key, observation_key

    maz_to_obs = {}
    for t in traces:
        mk, ok = mazurkiewicz_key(t), observation_key(t)
        assert maz_to_obs.setdefault(mk, ok) == ok


def test_partition_representatives_replayable():
    prog = load("rw_pair")
    part = oracle.partition(oracle.enumerate_maximal_traces(prog), "observation")
    for cls in part.classes:
        replay(prog, cls.representative)


# ---------------------------------------------------------------------------
# sleep-set baseline
# ---------------------------------------------------------------------------


def test_sleep_single_process():
    prog = lang.compile_source("global x = 0\nprocess p { write x = 1 }")
    rep = oracle.sleep_set_dpor(prog)
    assert rep.traces == 1


def test_sleep_covers_all_reordering_classes_p2wr():
    prog = load("p2wr")
    rep = oracle.sleep_set_dpor(prog)
    part = oracle.partition(oracle.enumerate_maximal_traces(prog), "mazurkiewicz")
    assert rep.traces >= part.count
    assert rep.class_keys == {c.key for c in part.classes}


@pytest.mark.parametrize("name", ACYCLIC_CORPUS + ["lastzero_2", "wr_grid_3"])
def test_sleep_soundness(name):
    prog = load(name)
    rep = oracle.sleep_set_dpor(prog)
    part = oracle.partition(oracle.enumerate_maximal_traces(prog), "mazurkiewicz")
    assert rep.traces >= part.count
    assert rep.class_keys == {c.key for c in part.classes}
    assert rep.traces <= len(oracle.enumerate_maximal_traces(prog))


# ---------------------------------------------------------------------------
# harvesting
# ---------------------------------------------------------------------------


def test_full_trace_harvest_is_observation():
    prog = load("p2wr")
    traces = oracle.enumerate_maximal_traces(prog)
    anns = oracle.harvest_annotations(traces[:1], 10**6)
    assert traces[0].observation() in anns


def test_prefix_harvest_at_init_is_empty():
    prog = load("p2wr")
    traces = oracle.enumerate_maximal_traces(prog)
    anns = oracle.harvest_annotations(traces, 10**6)
    assert {} in anns


def test_harvested_annotations_well_formed():
    from obsmc.annotations import compute_basis

    prog = load("withdraw")
    traces = oracle.enumerate_maximal_traces(prog)
    for ann in oracle.harvest_annotations(traces, 200):
        compute_basis(prog, ann)  # must not raise


# ---------------------------------------------------------------------------
# lifted reduction count self-validation
# ---------------------------------------------------------------------------


def test_lifted_count_equals_direct_reduced_enumeration():
    # On cyclic programs small enough to enumerate after lock wrapping,
    # the lifted key on original traces gives the same class count as the
    # refined partition of the wrapped program.
    from obsmc.model import acyclic_reduction

    for name in ("tiny_triangle", "wr_grid_3", "lastzero_2"):
        prog = load(name)
        cut = all_but_two_cycle_set(build_communication_graph(prog))
        red = acyclic_reduction(prog, cut)
        direct = oracle.partition(
            oracle.enumerate_maximal_traces(red.program, cap=500_000),
            "observation-refined",
            program=red.program,
            cut_edges=cut,
        )
        lifted, _ = oracle.partition_stream(prog, {"red": ("reduction-count", cut)})
        assert lifted["red"].count == direct.count, name


def test_brute_force_report_counts():
    rep = oracle.brute_force_report(load("p2wr"))
    assert rep.traces == 6
    assert rep.classes == 3
    assert rep.complete


def test_cyclic3_refined_counts_under_published_cut_choice():
    # The triangle example accepts (p1, p2) as a valid single-edge cut;
    # the refined count sits between the plain observation and the
    # reordering counts for that choice too.
    prog = load("cyclic3_1")
    cut = frozenset({(0, 1)})
    parts, _ = oracle.partition_stream(
        prog,
        {
            "obs": ("observation", None),
            "obsx": ("observation-refined", cut),
            "maz": ("mazurkiewicz", None),
        },
    )
    assert parts["obs"].count <= parts["obsx"].count <= parts["maz"].count
