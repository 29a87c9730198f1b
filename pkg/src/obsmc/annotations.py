"""Read-to-write annotations: the intended-observation maps that drive
exploration, their value function, well-formedness, and basis extraction.

A positive annotation maps reads to the writes they are meant to observe;
a negative annotation blacklists writes per read.  A well-formed positive
annotation determines, per process, a minimal deterministic sequential
trace (its basis) covering exactly the annotated reads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .model import (
    Acquire,
    Branch,
    Event,
    InputError,
    Loc,
    LocalAssign,
    Program,
    Read,
    Release,
    Write,
    eval_expr,
    is_read,
    is_visible,
    is_write,
    program_structure_leq,
)
from .execution import Trace

PositiveAnnotation = dict  # read eid -> write eid
NegativeAnnotation = dict  # read eid -> set of write eids


@dataclass
class AnnotationPair:
    positive: PositiveAnnotation = field(default_factory=dict)
    negative: NegativeAnnotation = field(default_factory=dict)

    def blocked(self, read: int) -> set:
        return self.negative.get(read, set())


class NotWellFormed(Exception):
    """Raised when an annotation admits no basis; carries the violated
    condition: acyclic, lock-observation, basis, coverage, conflict,
    divergence."""

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


def validate_annotation(program: Program, positive: PositiveAnnotation) -> None:
    """Type-level checks: pairs are read->write, never ordered read-first
    by the program structure."""
    for r, w in positive.items():
        er, ew = program.event(r), program.event(w)
        if not is_read(er.label) or er.is_init:
            raise InputError(f"annotation key {r} is not a read event")
        if not (is_write(ew.label) or ew.is_init):
            raise InputError(f"annotation value {w} is not a write event")
        if isinstance(er.label, Acquire) != isinstance(ew.label, Release):
            raise InputError(f"annotation pair ({r}, {w}) mixes lock and plain access")
        if program_structure_leq(program, r, w):
            raise InputError(f"annotation pair ({r}, {w}) is ordered read-first")


def annotation_order_acyclic(program: Program, positive: PositiveAnnotation) -> bool:
    """True iff program structure plus write-before-its-reader is a strict
    partial order over the annotated events."""
    nodes = set(positive) | set(positive.values())
    succ: dict[int, set[int]] = {n: set() for n in nodes}
    for a in nodes:
        for b in nodes:
            if a != b and program_structure_leq(program, a, b):
                succ[a].add(b)
    for r, w in positive.items():
        succ[w].add(r)
    color: dict[int, int] = {}

    def has_cycle(start: int) -> bool:
        stack = [(start, iter(succ[start]))]
        color[start] = 1
        while stack:
            node, it = stack[-1]
            for nxt in it:
                c = color.get(nxt)
                if c == 1:
                    return True
                if c is None:
                    color[nxt] = 1
                    stack.append((nxt, iter(succ[nxt])))
                    break
            else:
                color[node] = 2
                stack.pop()
        return False

    return not any(has_cycle(n) for n in nodes if n not in color)


@dataclass
class BasisEntry:
    eid: int
    loc: Optional[Loc]  # None for invisible events
    value: Optional[int]


@dataclass
class Basis:
    """Per-process minimal sequential traces induced by an annotation."""

    program: Program
    sequences: list[list[BasisEntry]]  # one per process, possibly empty
    values: dict[int, int]  # value per global event (init writes included)
    locs: dict[int, Loc]  # resolved location per global event

    def global_event_ids(self) -> list[int]:
        out = []
        for seq in self.sequences:
            for entry in seq:
                if entry.loc is not None:
                    out.append(entry.eid)
        return out


def _init_values(program: Program) -> tuple[dict[int, int], dict[int, Loc]]:
    values: dict[int, int] = {}
    locs: dict[int, Loc] = {}
    for ev in program.init_events:
        fam = ev.location_family()
        decl_init = (
            program.global_decl(fam).init if not program.is_lock(fam) else 0
        )
        values[ev.eid] = decl_init
        locs[ev.eid] = Loc(fam, None)
    return values, locs


@dataclass
class _Runner:
    pi: int
    node: int = 0
    env: dict = field(default_factory=dict)
    done: bool = False


def compute_basis(program: Program, positive: PositiveAnnotation) -> Basis:
    """Build the unique minimal basis or raise NotWellFormed.

    Each process is replayed locally from its root; annotated reads take
    the value of their annotated write, so values propagate across
    processes in dependency order.  The replay of a process stops at its
    structurally last annotated event.  An order cycle surfaces as a
    replay standstill, so acyclicity needs no separate pass.
    """
    validate_annotation(program, positive)

    targets: set[int] = set()
    for r, w in positive.items():
        if isinstance(program.event(r).label, Acquire):
            if w in targets:
                raise NotWellFormed("lock-observation", f"release {w} observed twice")
            targets.add(w)

    members = set(positive) | set(positive.values())
    per_proc: dict[int, list[int]] = {}
    for eid in members:
        ev = program.event(eid)
        if not ev.is_init:
            per_proc.setdefault(ev.proc, []).append(eid)

    stop_at: dict[int, int] = {}
    for pi, eids in per_proc.items():
        maximal = [
            e
            for e in eids
            if not any(x != e and program_structure_leq(program, e, x) for x in eids)
        ]
        if len(maximal) != 1:
            raise NotWellFormed(
                "basis", f"process {pi} has {len(maximal)} structurally last events"
            )
        stop_at[pi] = maximal[0]

    values, locs = _init_values(program)
    sequences: list[list[BasisEntry]] = [[] for _ in program.processes]
    runners = [
        _Runner(pi, 0, dict(program.processes[pi].locals_init)) for pi in stop_at
    ]

    def resolve(ev: Event, env: dict) -> Loc:
        lab = ev.label
        if isinstance(lab, (Acquire, Release)):
            return Loc(lab.lock, None)
        index = getattr(lab, "index", None)
        if index is None:
            return Loc(lab.var, None)
        idx = eval_expr(index, env)
        decl = program.global_decl(lab.var)
        if not 0 <= idx < (decl.size or 0):
            raise NotWellFormed("divergence", f"index {lab.var}[{idx}] out of bounds")
        return Loc(lab.var, idx)

    def advance(run: _Runner) -> bool:
        """Execute events until blocked on a missing value, finished, or
        ill-formed.  Returns True if any event was executed."""
        progressed = False
        seq = sequences[run.pi]
        while not run.done:
            out = program.out_edges(run.pi, run.node)
            ev: Optional[Event] = None
            if len(out) == 1 and not isinstance(out[0].label, Branch):
                ev = out[0]
            else:
                for cand in out:
                    if eval_expr(cand.label.guard, run.env):
                        ev = cand
                        break
            if ev is None:
                raise NotWellFormed(
                    "divergence", f"process {run.pi} stuck before event {stop_at[run.pi]}"
                )
            lab = ev.label
            if isinstance(lab, LocalAssign):
                run.env[lab.target] = eval_expr(lab.value, run.env)
                seq.append(BasisEntry(ev.eid, None, None))
            elif isinstance(lab, Branch):
                seq.append(BasisEntry(ev.eid, None, None))
            elif is_read(lab):
                if ev.eid not in positive:
                    raise NotWellFormed(
                        "coverage", f"unannotated read {ev.eid} on the replay path"
                    )
                w = positive[ev.eid]
                if w not in values:
                    return progressed  # blocked until the write's value exists
                loc = resolve(ev, run.env)
                if not loc.overlaps(locs[w]):
                    raise NotWellFormed(
                        "conflict", f"pair ({ev.eid}, {w}) resolves to disjoint cells"
                    )
                value = values[w]
                if isinstance(lab, Read):
                    run.env[lab.target] = value
                values[ev.eid] = value
                locs[ev.eid] = loc
                seq.append(BasisEntry(ev.eid, loc, value))
            else:  # Write or Release
                loc = resolve(ev, run.env)
                value = eval_expr(lab.value, run.env) if isinstance(lab, Write) else 0
                values[ev.eid] = value
                locs[ev.eid] = loc
                seq.append(BasisEntry(ev.eid, loc, value))
            run.node = ev.dst
            progressed = True
            if ev.eid == stop_at[run.pi]:
                run.done = True
        return progressed

    pending = [r for r in runners]
    while pending:
        progressed = False
        for run in pending:
            if advance(run):
                progressed = True
        pending = [r for r in pending if not r.done]
        if pending and not progressed:
            raise NotWellFormed("acyclic", "value computation reached a standstill")

    emitted_reads = {
        e.eid
        for seq in sequences
        for e in seq
        if e.loc is not None and is_read(program.event(e.eid).label)
    }
    if emitted_reads != set(positive):
        raise NotWellFormed(
            "coverage", f"annotated reads off the replay path: {set(positive) - emitted_reads}"
        )
    for w in set(positive.values()):
        if w not in values:
            raise NotWellFormed("coverage", f"annotated write {w} not reached")
    for pi, seq in enumerate(sequences):
        held: dict[str, bool] = {}
        for entry in seq:
            lab = program.event(entry.eid).label
            if isinstance(lab, Acquire):
                if held.get(lab.lock):
                    raise NotWellFormed("basis", f"re-acquire of {lab.lock} in sequence {pi}")
                held[lab.lock] = True
            elif isinstance(lab, Release):
                held[lab.lock] = False
    return Basis(program, sequences, values, locs)


def value_function(program: Program, positive: PositiveAnnotation) -> dict[int, int]:
    """Values forced by an annotation on its reads and writes, via the
    inductive local replay that also builds the basis."""
    if not annotation_order_acyclic(program, positive):
        raise InputError("value function requires an acyclic annotation")
    basis = compute_basis(program, positive)
    keep = set(positive) | set(positive.values())
    return {e: v for e, v in basis.values.items() if e in keep}


def star_membership(trace: Trace, basis: Basis) -> bool:
    """Does the trace interleave exactly the basis's global events?"""
    program = trace.program
    trace_globals = {
        eid for eid in trace.global_projection() if not program.event(eid).is_init
    }
    return trace_globals == set(basis.global_event_ids())


def to_json_dict(pair: AnnotationPair) -> dict:
    return {
        "pos": sorted([r, w] for r, w in pair.positive.items()),
        "neg": {str(r): sorted(ws) for r, ws in sorted(pair.negative.items()) if ws},
    }
