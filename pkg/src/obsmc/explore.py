"""Observation-class exploration: causal past cones and the recursive
mutate-realize-extend search, plus its report types and class keys.

Each call holds a maximal trace compatible with its positive annotation.
Unannotated reads are re-pointed at conflicting writes; a successful
mutation is realized into a witness trace, extended, blacklisted for the
remaining siblings, and recursed into.  Mutations always annotate the
causal past of the touched events as well, which keeps every basis replay
covered and the recursion shallow.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

from . import annotations as annot
from . import realize as rlz
from .model import (
    Acquire,
    Branch,
    InputError,
    Program,
    acyclic_reduction,
    all_but_two_cycle_set,
    build_communication_graph,
    is_acyclic,
    is_read,
    is_write,
    program_structure_leq,
)
from .execution import Trace, maximal_extension, replay


# --------------------------------------------------------------------------
# Reports
# --------------------------------------------------------------------------


@dataclass
class Violation:
    assert_id: str
    witness: list[int]  # replayable schedule of global events


@dataclass
class ExplorationReport:
    program: str
    algo: str
    calls: int = 0
    realize_attempts: int = 0
    unrealizable: int = 0
    unrealizable_cycle: int = 0
    unrealizable_not_well_formed: int = 0
    unrealizable_unsat: int = 0
    traces: int = 0
    class_keys: set = field(default_factory=set)
    violations: list[Violation] = field(default_factory=list)
    duplicate_annotations: int = 0
    wall_ms: float = 0.0
    complete: bool = True

    @property
    def classes(self) -> int:
        return len(self.class_keys)

    def to_json_dict(self) -> dict:
        return {
            "program": self.program,
            "algo": self.algo,
            "traces": self.traces,
            "classes": self.classes,
            "calls": self.calls,
            "unrealizable": self.unrealizable,
            "time_ms": round(self.wall_ms, 3),
            "violations": [
                {"assert_id": v.assert_id, "witness": v.witness} for v in self.violations
            ],
            "complete": self.complete,
        }


class LimitExceeded(Exception):
    pass


@dataclass
class ExploreConfig:
    mode: str = "acyclic"  # or "cyclic"
    # Annotate the causal pasts of a mutation in one step.  Off by
    # default: freezing a cone read's current observation, combined with
    # the sibling blacklist, makes some classes unreachable.  The
    # one-pair-at-a-time loop is self-correcting instead: a premature
    # mutation fails the basis check without touching the blacklist and
    # is retried once its past is annotated.
    burst: bool = False
    skip_current_observation: bool = False
    max_calls: Optional[int] = None
    max_seconds: Optional[float] = None
    log: Optional[object] = None  # callable(str) progress sink


# --------------------------------------------------------------------------
# Class keys (shared with the ground-truth partitioners)
# --------------------------------------------------------------------------


def observation_key(trace: Trace) -> tuple:
    obs = trace.observation()
    events = frozenset(trace.global_projection())
    return (events, frozenset(obs.items()))


def mazurkiewicz_key(trace: Trace) -> tuple:
    from .execution import dependent_pairs

    return (frozenset(trace.global_projection()), dependent_pairs(trace))


def _x_edge_write_pairs(trace: Trace, x_edges: frozenset, labels: dict) -> frozenset:
    """Ordered pairs of conflicting non-init writes from the processes of a
    cut edge, on that edge's shared variables."""
    program = trace.program
    entries = [
        (i, e)
        for i, e in enumerate(trace.visible_entries())
        if is_write(program.event(e.eid).label) and not program.event(e.eid).is_init
    ]
    pairs = set()
    for (pi, pj) in x_edges:
        fams = labels.get((pi, pj), frozenset())
        group = [
            (i, e)
            for i, e in entries
            if e.proc in (pi, pj) and e.loc.name in fams
        ]
        for a in range(len(group)):
            ia, ea = group[a]
            for b in range(a + 1, len(group)):
                ib, eb = group[b]
                if ea.loc.overlaps(eb.loc):
                    pairs.add((ea.eid, eb.eid))
    return frozenset(pairs)


def refined_observation_key(trace: Trace, x_edges: frozenset, labels: dict) -> tuple:
    return observation_key(trace) + (_x_edge_write_pairs(trace, x_edges, labels),)


def reduction_count_key(trace: Trace, lock_plan: dict) -> tuple:
    """Key on original-program traces whose class count equals the refined
    count on the lock-wrapped program: observations plus, per wrap lock,
    the order of the writes that lock would serialize."""
    program = trace.program
    orders: dict = {}
    for e in trace.visible_entries():
        ev = program.event(e.eid)
        if ev.is_init or not is_write(ev.label):
            continue
        mode = lock_plan.get(e.loc.name)
        if mode is None:
            continue
        group = e.loc.name if mode == "family" else (e.loc.name, e.loc.index)
        orders.setdefault(group, []).append(e.eid)
    return observation_key(trace) + (
        tuple((g, tuple(orders[g])) for g in sorted(orders, key=str)),
    )


# --------------------------------------------------------------------------
# Causal past cones and mutations
# --------------------------------------------------------------------------


def causal_past_cone(trace: Trace, eid: int) -> set:
    """Events that may causally enable `eid` in the trace: its structural
    predecessors, transitively, plus the writes its reads observed.

    Per-process events in a trace follow one CFG path, so the cone is a
    per-process prefix closed under observed writes.
    """
    program = trace.program
    if eid not in trace.index:
        raise InputError(f"event {eid} does not occur in the trace")
    ev0 = program.event(eid)
    if ev0.is_init:
        return set()
    obs = trace.observation()

    proc_events: dict[int, list[int]] = {}
    proc_pos: dict[int, int] = {}
    for e in trace.entries:
        if program.event(e.eid).is_init:
            continue
        lst = proc_events.setdefault(e.proc, [])
        proc_pos[e.eid] = len(lst)
        lst.append(e.eid)

    included: dict[int, int] = {p: -1 for p in proc_events}

    def extend_to(p: int, k: int, work: list) -> None:
        if k <= included[p]:
            return
        lst = proc_events[p]
        for j in range(included[p] + 1, k + 1):
            e = lst[j]
            if e in obs:
                work.append(obs[e])
        included[p] = k

    work: list[int] = []
    extend_to(ev0.proc, proc_pos[eid] - 1, work)
    while work:
        w = work.pop()
        wev = program.event(w)
        if wev.is_init:
            continue
        extend_to(wev.proc, proc_pos[w], work)

    cone = {e.eid for e in program.init_events}
    for p, k in included.items():
        cone.update(proc_events[p][: k + 1])
    return cone


def burst_annotation(trace: Trace, positive: dict, r: int, w: int) -> dict:
    """The mutation (r, w) plus current observations for every read in the
    causal pasts of r and w; existing entries must agree."""
    obs = trace.observation()
    program = trace.program
    out = dict(positive)
    out[r] = w
    cone = causal_past_cone(trace, r) | causal_past_cone(trace, w)
    for e in cone:
        if e in obs and e != r:
            if e in positive and positive[e] != obs[e]:
                raise InputError(
                    f"trace observation for read {e} contradicts the annotation"
                )
            out[e] = obs[e]
    return out


def candidate_mutations(trace: Trace, pair: annot.AnnotationPair) -> list[tuple[int, int]]:
    """(read, write) mutations in deterministic order: unannotated reads by
    trace index, then conflicting writes allowed by the blacklist by trace
    index."""
    program = trace.program
    reads = []
    writes = []
    for e in trace.visible_entries():
        ev = program.event(e.eid)
        if ev.is_init:
            writes.append(e)
        elif is_read(ev.label):
            reads.append(e)
        elif is_write(ev.label):
            writes.append(e)
    out = []
    for r_entry in reads:
        r = r_entry.eid
        if r in pair.positive:
            continue
        blocked = pair.blocked(r)
        r_is_lock = isinstance(program.event(r).label, Acquire)
        for w_entry in writes:
            w = w_entry.eid
            if w in blocked:
                continue
            if not w_entry.loc.overlaps(r_entry.loc):
                continue
            w_is_lock = program.is_lock(w_entry.loc.name)
            if r_is_lock != w_is_lock:
                continue
            if program_structure_leq(program, r, w):
                continue
            out.append((r, w))
    return out


# --------------------------------------------------------------------------
# The explorer
# --------------------------------------------------------------------------


class _Explorer:
    def __init__(self, program: Program, config: ExploreConfig):
        self.config = config
        self.t0 = time.perf_counter()
        self.x_edges: frozenset = frozenset()
        self.x_labels: dict = {}
        if config.mode == "cyclic":
            graph = build_communication_graph(program)
            self.x_edges = all_but_two_cycle_set(graph)
            self.x_labels = {e: graph.label(*e) for e in self.x_edges}
            reduction = acyclic_reduction(program, self.x_edges)
            self.program = reduction.program
            self.mode = rlz.cyclic_mode(
                reduction.program, self.x_edges, reduction.protected_vars
            )
        else:
            graph = build_communication_graph(program)
            if not is_acyclic(graph):
                raise InputError(
                    "communication graph is cyclic; this exploration mode needs an "
                    "acyclic architecture (use the cyclic mode instead)"
                )
            self.program = program
            self.mode = rlz.acyclic_mode(program)
        self.report = ExplorationReport(program.name, "dc-cyclic" if config.mode == "cyclic" else "dc")
        self.seen_annotations: set = set()
        self.seen_asserts: set = set()

    def class_key(self, trace: Trace) -> tuple:
        if self.config.mode == "cyclic":
            return refined_observation_key(trace, self.x_edges, self.x_labels)
        return observation_key(trace)

    def check_limits(self) -> None:
        if self.config.max_calls is not None and self.report.calls >= self.config.max_calls:
            raise LimitExceeded("call cap")
        if (
            self.config.max_seconds is not None
            and time.perf_counter() - self.t0 > self.config.max_seconds
        ):
            raise LimitExceeded("time cap")

    def record_trace(self, trace: Trace) -> None:
        self.report.traces += 1
        self.report.class_keys.add(self.class_key(trace))
        for entry in trace.entries:
            ev = self.program.event(entry.eid)
            if isinstance(ev.label, Branch) and ev.label.assert_id is not None:
                if ev.label.assert_id not in self.seen_asserts:
                    self.seen_asserts.add(ev.label.assert_id)
                    self.report.violations.append(
                        Violation(ev.label.assert_id, trace.global_projection())
                    )

    def visit(self, trace: Trace, pair: annot.AnnotationPair, depth: int) -> None:
        self.check_limits()
        self.report.calls += 1
        key = frozenset(pair.positive.items())
        if key in self.seen_annotations:
            self.report.duplicate_annotations += 1
        self.seen_annotations.add(key)
        self.record_trace(trace)
        if self.config.log is not None:
            self.config.log(
                f"call depth={depth} annotated={len(pair.positive)} "
                f"classes={self.report.classes}"
            )
        obs = trace.observation()
        for r, w in candidate_mutations(trace, pair):
            current = obs.get(r) == w
            if self.config.skip_current_observation and current:
                continue
            self.check_limits()
            if self.config.burst:
                positive = burst_annotation(trace, pair.positive, r, w)
            else:
                positive = dict(pair.positive)
                positive[r] = w
            self.report.realize_attempts += 1
            if current:
                # The trace itself witnesses the strengthened annotation;
                # only its basis coverage needs checking, and the child can
                # keep exploring this very trace.
                ok = rlz.covers_required_reads(self.program, positive)
                if ok:
                    try:
                        annot.compute_basis(self.program, positive)
                    except annot.NotWellFormed:
                        ok = False
                if not ok:
                    self.report.unrealizable += 1
                    self.report.unrealizable_not_well_formed += 1
                    continue
                extended = trace
            else:
                result = rlz.realize(self.program, positive, self.mode)
                if isinstance(result, rlz.Unrealizable):
                    self.report.unrealizable += 1
                    if result.reason == "cycle":
                        self.report.unrealizable_cycle += 1
                    elif result.reason == "not-well-formed":
                        self.report.unrealizable_not_well_formed += 1
                    else:
                        self.report.unrealizable_unsat += 1
                    continue
                extended = maximal_extension(result)
            pair.negative.setdefault(r, set()).add(w)
            child = annot.AnnotationPair(
                positive, {k: set(v) for k, v in pair.negative.items()}
            )
            self.visit(extended, child, depth + 1)

    def run(self) -> ExplorationReport:
        try:
            first = maximal_extension(
                replay(self.program, [e.eid for e in self.program.init_events])
            )
            self.visit(first, annot.AnnotationPair(), 0)
        except LimitExceeded:
            self.report.complete = False
        self.report.wall_ms = (time.perf_counter() - self.t0) * 1000
        return self.report


def explore(program: Program, config: Optional[ExploreConfig] = None) -> ExplorationReport:
    """Run the class-optimal exploration and report counts, classes found,
    and any assertion violations with replayable witnesses."""
    return _Explorer(program, config or ExploreConfig()).run()


def check_assertions(report: ExplorationReport) -> list[Violation]:
    return list(report.violations)
