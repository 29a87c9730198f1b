from __future__ import annotations

import pytest

from obsmc import lang, oracle
from obsmc.annotations import AnnotationPair
from obsmc.execution import maximal_extension, replay
from obsmc.explore import (
    ExploreConfig,
    burst_annotation,
    candidate_mutations,
    causal_past_cone,
    check_assertions,
    explore,
)
from obsmc.model import InputError, Read, Write

from conftest import ACYCLIC_CORPUS, load


def init_ids(prog):
    return [e.eid for e in prog.init_events]


# ---------------------------------------------------------------------------
# causal past cones
# ---------------------------------------------------------------------------


def test_cone_of_process_initial_event_is_inits():
    prog = load("p2wr")
    w2 = prog.processes[1].edges[0].eid
    t = maximal_extension(replay(prog, init_ids(prog)))
    assert causal_past_cone(t, w2) == set(init_ids(prog))


def test_cone_pulls_observed_write():
    # p2 reads what p1 wrote; the event after the read carries the writer
    # in its causal past.
    prog = load("chain3")
    wx = prog.processes[0].edges[0].eid
    rx = prog.processes[1].edges[0].eid
    wy = prog.processes[1].edges[1].eid
    t = maximal_extension(replay(prog, init_ids(prog)))
    cone = causal_past_cone(t, wy)
    assert rx in cone and wx in cone


def test_cone_members_happen_before_and_nest():
    from obsmc.execution import happens_before

    for name in ("withdraw", "rw_pair", "branch_on_read"):
        prog = load(name)
        for t in oracle.enumerate_maximal_traces(prog)[:10]:
            hb = happens_before(t)
            for e in t.global_projection():
                cone = causal_past_cone(t, e)
                for e2 in cone:
                    if not prog.event(e2).is_init and e2 in set(t.global_projection()):
                        assert (e2, e) in hb
                    assert causal_past_cone(t, e2) <= cone


def test_cone_unknown_event():
    prog = load("p2wr")
    t = maximal_extension(replay(prog, init_ids(prog)))
    with pytest.raises(InputError):
        causal_past_cone(t, 9999)


# ---------------------------------------------------------------------------
# bursts
# ---------------------------------------------------------------------------


def test_burst_without_cone_reads_is_single_pair():
    prog = load("p2wr")
    t = maximal_extension(replay(prog, init_ids(prog)))
    r1 = prog.processes[0].edges[1].eid
    w2 = prog.processes[1].edges[0].eid
    assert burst_annotation(t, {}, r1, w2) == {r1: w2}


def test_burst_annotates_cone_reads():
    prog = load("chain3")
    t = maximal_extension(replay(prog, init_ids(prog)))
    rx = prog.processes[1].edges[0].eid
    wy = prog.processes[1].edges[1].eid
    ry = prog.processes[2].edges[0].eid
    out = burst_annotation(t, {}, ry, wy)
    assert out[ry] == wy
    assert out[rx] == t.observation()[rx]


def test_burst_idempotent_when_cone_annotated():
    prog = load("chain3")
    t = maximal_extension(replay(prog, init_ids(prog)))
    rx = prog.processes[1].edges[0].eid
    wy = prog.processes[1].edges[1].eid
    ry = prog.processes[2].edges[0].eid
    once = burst_annotation(t, {}, ry, wy)
    again = burst_annotation(t, {rx: t.observation()[rx]}, ry, wy)
    assert once == again


# ---------------------------------------------------------------------------
# candidate mutations
# ---------------------------------------------------------------------------


def test_all_reads_annotated_no_candidates():
    prog = load("p2wr")
    t = maximal_extension(replay(prog, init_ids(prog)))
    pair = AnnotationPair(dict(t.observation()), {})
    assert candidate_mutations(t, pair) == []


def test_p2wr_candidates_in_trace_order():
    prog = load("p2wr")
    w1, r1 = (e.eid for e in prog.processes[0].edges)
    w2, r2 = (e.eid for e in prog.processes[1].edges)
    init = prog.init_events[0].eid
    t = replay(prog, init_ids(prog) + [w1, r1, w2, r2])
    got = candidate_mutations(t, AnnotationPair())
    assert got == [(r1, init), (r1, w1), (r1, w2), (r2, init), (r2, w1), (r2, w2)]


def test_blacklisted_write_excluded():
    prog = load("p2wr")
    w1, r1 = (e.eid for e in prog.processes[0].edges)
    w2, r2 = (e.eid for e in prog.processes[1].edges)
    t = replay(prog, init_ids(prog) + [w1, r1, w2, r2])
    got = candidate_mutations(t, AnnotationPair({}, {r1: {w2}}))
    assert (r1, w2) not in got
    assert (r2, w2) in got


def test_candidates_respect_lock_kinds():
    prog = load("locks_cs")
    t = maximal_extension(replay(prog, init_ids(prog)))
    for r, w in candidate_mutations(t, AnnotationPair()):
        from obsmc.model import Acquire, Release

        r_lock = isinstance(prog.event(r).label, Acquire)
        w_ev = prog.event(w)
        w_lock = prog.is_lock(w_ev.location_family())
        assert r_lock == w_lock


# ---------------------------------------------------------------------------
# explore
# ---------------------------------------------------------------------------


def test_p2wr_three_classes():
    rep = explore(load("p2wr"))
    assert rep.classes == 3
    assert rep.duplicate_annotations == 0
    assert not rep.violations


def test_single_process_one_class():
    prog = lang.compile_source("global x = 0\nprocess p { write x = 1\nv = read x }")
    rep = explore(prog)
    assert rep.classes == 1
    # one root call plus the read's keep-current-observation child
    assert rep.calls == 2
    rep2 = explore(prog, ExploreConfig(skip_current_observation=True))
    assert rep2.classes == 1 and rep2.calls == 1


def test_wr_chain_class_bound():
    for n, name in ((2, "wr_chain_2"), (3, "wr_chain_3")):
        prog = load(name)
        rep = explore(prog)
        po = oracle.partition(oracle.enumerate_maximal_traces(prog), "observation")
        assert rep.classes == po.count
        assert rep.classes <= 2 * (n + 1)


@pytest.mark.parametrize("name", ACYCLIC_CORPUS)
def test_optimality_against_oracle(name):
    prog = load(name)
    rep = explore(prog)
    po = oracle.partition(oracle.enumerate_maximal_traces(prog), "observation")
    assert rep.classes == po.count
    assert rep.duplicate_annotations == 0


def test_cyclic_mode_rejected_architectures():
    with pytest.raises(InputError, match="cyclic"):
        explore(load("cyclic3_1"))


def test_cyclic_mode_matches_lifted_oracle():
    from obsmc.model import all_but_two_cycle_set, build_communication_graph

    for name in ("tiny_triangle", "wr_grid_3", "lastzero_2"):
        prog = load(name)
        rep = explore(prog, ExploreConfig(mode="cyclic"))
        cut = all_but_two_cycle_set(build_communication_graph(prog))
        parts, _ = oracle.partition_stream(prog, {"red": ("reduction-count", cut)})
        assert rep.classes == parts["red"].count, name
        assert rep.duplicate_annotations == 0


def test_limits_flag_incomplete():
    rep = explore(load("withdraw"), ExploreConfig(max_calls=2))
    assert not rep.complete


def test_every_call_strictly_extends_domain():
    # depth never exceeds the number of reads
    prog = load("withdraw")
    reads = sum(
        1
        for e in prog.events.values()
        if isinstance(e.label, Read) or type(e.label).__name__ == "Acquire"
    )
    seen_depths = []
    orig = ExploreConfig(log=lambda msg: seen_depths.append(msg))
    explore(prog, orig)
    depths = [int(m.split("depth=")[1].split()[0]) for m in seen_depths]
    assert max(depths) <= reads


# ---------------------------------------------------------------------------
# assertions
# ---------------------------------------------------------------------------



def test_protected_assert_has_no_violations():
    rep = explore(load("assert_safe"))
    assert check_assertions(rep) == []
    brute = oracle.brute_force_report(load("assert_safe"))
    assert brute.violations == []


def test_racy_assert_reports_replayable_witness():
    prog = load("assert_racy")
    rep = explore(prog)
    violations = check_assertions(rep)
    assert len(violations) == 1
    witness = violations[0].witness
    t = replay(prog, witness)
    sink = next(
        e.eid
        for e in prog.events.values()
        if type(e.label).__name__ == "Branch" and e.label.assert_id
    )
    assert sink in t.events()
    brute = oracle.brute_force_report(prog)
    assert {v.assert_id for v in brute.violations} == {
        v.assert_id for v in violations
    }


def test_no_asserts_no_violations():
    rep = explore(load("p2wr"))
    assert check_assertions(rep) == []


# ---------------------------------------------------------------------------
# inevitability spot check
# ---------------------------------------------------------------------------


def test_inevitability_on_sampled_pairs():
    # When every read in an event's causal past appears with equal
    # observation in another trace's prefix, every maximal extension of
    # that prefix contains the event.
    checked = 0
    for name in ("p2wr", "rw_pair", "withdraw"):
        prog = load(name)
        traces = oracle.enumerate_maximal_traces(prog)
        for t1 in traces[:4]:
            for e in t1.global_projection()[prog.n_init():]:
                cone_reads = {
                    r: t1.observation()[r]
                    for r in causal_past_cone(t1, e)
                    if r in t1.observation()
                }
                for t2_full in traces[:6]:
                    vis = t2_full.global_projection()
                    for cut in (prog.n_init(), len(vis) // 2):
                        t2 = replay(prog, vis[:cut])
                        obs2 = t2.observation()
                        if all(obs2.get(r) == w for r, w in cone_reads.items()):
                            for ext in _all_maximal_extensions(prog, t2):
                                assert e in ext
                                checked += 1
    assert checked >= 100


def _all_maximal_extensions(prog, trace):
    # exhaustive extension search over global events
    from obsmc.execution import Cursor

    out = []

    def rec(cur):
        choices = cur.enabled_visible()
        if not choices:
            out.append({e.eid for e in cur.entries})
            return
        for ev in choices:
            tokens = cur.step_visible(ev)
            rec(cur)
            cur.revert_all(tokens)

    rec(Cursor.from_state(prog, trace.end_state, trace.entries))
    return out
