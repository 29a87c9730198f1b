"""Ground truth at desk scale: exhaustive maximal-trace enumeration,
equivalence partitioning, and a sleep-set reordering baseline.

Enumeration is a depth-first walk over enabled global events with undo,
so shared prefixes are executed once.  Partitions can be computed
streaming, without keeping traces.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional

from .execution import Cursor, Trace
from .explore import (
    ExplorationReport,
    Violation,
    mazurkiewicz_key,
    observation_key,
    refined_observation_key,
    reduction_count_key,
)
from .model import (
    Acquire,
    Branch,
    ModelError,
    Program,
    build_communication_graph,
    is_write,
)

DEFAULT_CAP = 2_000_000


class CapExceeded(RuntimeError):
    pass


def _assert_eids(program: Program) -> dict[int, str]:
    out = {}
    for ev in program.events.values():
        if isinstance(ev.label, Branch) and ev.label.assert_id is not None:
            out[ev.eid] = ev.label.assert_id
    return out


def _check_lock_free(program: Program, cur: Cursor) -> None:
    for lk in program.locks:
        if cur.vals[lk]:
            raise ModelError(f"deadlock: maximal trace ends with lock {lk} held")


def for_each_maximal(
    program: Program, visit: Callable[[Cursor], None], cap: int = DEFAULT_CAP
) -> int:
    """Depth-first enumeration; `visit` sees the cursor at each maximal
    trace.  Returns the count; raises CapExceeded past the cap."""
    cur = Cursor(program)
    count = 0

    def rec() -> None:
        nonlocal count
        choices = cur.enabled_visible()
        if not choices:
            _check_lock_free(program, cur)
            count += 1
            if count > cap:
                raise CapExceeded(f"more than {cap} maximal traces")
            visit(cur)
            return
        for ev in sorted(choices, key=lambda e: (e.proc, e.eid)):
            tokens = cur.step_visible(ev)
            rec()
            cur.revert_all(tokens)

    rec()
    return count


def iter_maximal_traces(program: Program, cap: int = DEFAULT_CAP) -> Iterator[Trace]:
    acc: list[Trace] = []

    def visit(cur: Cursor) -> None:
        acc.append(cur.to_trace())

    # Depth-first order is deterministic; collect in batches would not
    # help here, the recursion must finish before undo, so buffer all.
    for_each_maximal(program, visit, cap)
    return iter(acc)


def enumerate_maximal_traces(program: Program, cap: int = DEFAULT_CAP) -> list[Trace]:
    """All maximal traces in deterministic (lowest process first) order."""
    return list(iter_maximal_traces(program, cap))


# --------------------------------------------------------------------------
# Partitions
# --------------------------------------------------------------------------


@dataclass
class ClassInfo:
    key: tuple
    size: int
    representative: list[int]  # replayable schedule


@dataclass
class ClassPartition:
    kind: str
    classes: list[ClassInfo]

    @property
    def count(self) -> int:
        return len(self.classes)

    @property
    def total_traces(self) -> int:
        return sum(c.size for c in self.classes)


def _key_function(
    program: Program, kind: str, cut_edges: Optional[frozenset] = None
) -> Callable[[Trace], tuple]:
    if kind == "mazurkiewicz":
        return mazurkiewicz_key
    if kind == "observation":
        return observation_key
    if kind == "observation-refined":
        graph = build_communication_graph(program)
        edges = cut_edges if cut_edges is not None else frozenset()
        labels = {e: graph.label(*e) for e in edges}
        return lambda t: refined_observation_key(t, edges, labels)
    if kind == "reduction-count":
        from .model import reduction_lock_plan

        graph = build_communication_graph(program)
        edges = cut_edges if cut_edges is not None else frozenset()
        protected = (
            set().union(*(graph.label(*e) for e in edges)) if edges else set()
        )
        plan = reduction_lock_plan(program, protected)
        return lambda t: reduction_count_key(t, plan)
    raise ValueError(f"unknown equivalence kind {kind!r}")


def partition(
    traces: Iterable[Trace],
    kind: str,
    program: Optional[Program] = None,
    cut_edges: Optional[frozenset] = None,
) -> ClassPartition:
    """Group maximal traces by an equivalence: 'mazurkiewicz',
    'observation', or 'observation-refined' (needs cut_edges)."""
    traces = list(traces)
    if program is None and traces:
        program = traces[0].program
    keyfn = _key_function(program, kind, cut_edges)
    seen: dict[tuple, ClassInfo] = {}
    for t in traces:
        k = keyfn(t)
        info = seen.get(k)
        if info is None:
            seen[k] = ClassInfo(k, 1, t.global_projection())
        else:
            info.size += 1
    return ClassPartition(kind, list(seen.values()))


def partition_stream(
    program: Program,
    kinds: dict[str, tuple[str, Optional[frozenset]]],
    cap: int = DEFAULT_CAP,
) -> tuple[dict[str, ClassPartition], int]:
    """Enumerate once and partition under several equivalences at once;
    `kinds` maps an output label to (kind, cut_edges)."""
    keyfns = {
        label: _key_function(program, kind, cut)
        for label, (kind, cut) in kinds.items()
    }
    seen: dict[str, dict[tuple, ClassInfo]] = {label: {} for label in kinds}

    def visit(cur: Cursor) -> None:
        t = cur.to_trace()
        for label, fn in keyfns.items():
            k = fn(t)
            info = seen[label].get(k)
            if info is None:
                seen[label][k] = ClassInfo(k, 1, t.global_projection())
            else:
                info.size += 1

    total = for_each_maximal(program, visit, cap)
    return (
        {
            label: ClassPartition(kinds[label][0], list(found.values()))
            for label, found in seen.items()
        },
        total,
    )


def brute_force_report(
    program: Program, cap: int = DEFAULT_CAP, collect_classes: bool = True
) -> ExplorationReport:
    """Exhaustive enumeration shaped as an exploration report (observation
    classes, assertion violations)."""
    report = ExplorationReport(program.name, "brute")
    asserts = _assert_eids(program)
    seen_asserts: set[str] = set()
    t0 = time.perf_counter()

    def visit(cur: Cursor) -> None:
        report.traces += 1
        t = cur.to_trace()
        if collect_classes:
            report.class_keys.add(observation_key(t))
        for eid, aid in asserts.items():
            if eid in t.index and aid not in seen_asserts:
                seen_asserts.add(aid)
                report.violations.append(Violation(aid, t.global_projection()))

    try:
        for_each_maximal(program, visit, cap)
    except CapExceeded:
        report.complete = False
    report.calls = report.traces
    report.wall_ms = (time.perf_counter() - t0) * 1000
    return report


# --------------------------------------------------------------------------
# Sleep-set baseline
# --------------------------------------------------------------------------


def _independent(program: Program, a, b, locs) -> bool:
    ea, eb = program.event(a), program.event(b)
    if ea.proc == eb.proc:
        return False
    la, lb = locs.get(a), locs.get(b)
    if la is None or lb is None or not la.overlaps(lb):
        return la is not None and lb is not None
    if is_write(ea.label) or is_write(eb.label):
        return False
    if isinstance(ea.label, Acquire) and isinstance(eb.label, Acquire):
        return False  # one disables the other
    return True


def sleep_set_dpor(
    program: Program,
    cap: Optional[int] = None,
    max_seconds: Optional[float] = None,
    collect_classes: bool = True,
) -> ExplorationReport:
    """Reordering-equivalence baseline: depth-first scheduling with sleep
    sets over the dependence relation.  Covers at least one trace per
    reordering class; not optimal."""
    report = ExplorationReport(program.name, "sleep")
    asserts = _assert_eids(program)
    seen_asserts: set[str] = set()
    cur = Cursor(program)
    t0 = time.perf_counter()

    class _Stop(Exception):
        pass

    def rec(sleep: set[int]) -> None:
        choices = cur.enabled_visible()
        if not choices:
            _check_lock_free(program, cur)
            report.traces += 1
            if cap is not None and report.traces >= cap:
                raise _Stop()
            if max_seconds is not None and time.perf_counter() - t0 > max_seconds:
                raise _Stop()
            if collect_classes or asserts:
                t = cur.to_trace()
                if collect_classes:
                    report.class_keys.add(mazurkiewicz_key(t))
                for eid, aid in asserts.items():
                    if eid in t.index and aid not in seen_asserts:
                        seen_asserts.add(aid)
                        report.violations.append(Violation(aid, t.global_projection()))
            return
        avail = [e for e in choices if e.eid not in sleep]
        if not avail:
            return
        locs = {e.eid: cur.resolve_loc(e) for e in choices}
        explored = set(sleep)
        for ev in sorted(avail, key=lambda e: (e.proc, e.eid)):
            tokens = cur.step_visible(ev)
            child = {s for s in explored if _independent(program, s, ev.eid, locs)}
            rec(child)
            cur.revert_all(tokens)
            explored.add(ev.eid)

    try:
        rec(set())
    except _Stop:
        report.complete = False
    report.calls = report.traces
    report.wall_ms = (time.perf_counter() - t0) * 1000
    return report


# --------------------------------------------------------------------------
# Annotation harvesting
# --------------------------------------------------------------------------


def harvest_annotations(traces: Iterable[Trace], samples: int) -> list[dict]:
    """Distinct prefix observation maps from the given traces, in
    deterministic order; inputs for the realization round-trip."""
    out: list[dict] = []
    seen: set[frozenset] = set()
    for trace in traces:
        n_init = trace.program.n_init()
        vis = trace.visible_entries()
        obs = trace.observation()
        for cut in range(n_init, len(vis) + 1):
            ann = {
                e.eid: obs[e.eid]
                for e in vis[:cut]
                if e.eid in obs
            }
            key = frozenset(ann.items())
            if key in seen:
                continue
            seen.add(key)
            out.append(ann)
            if len(out) >= samples:
                return out
    return out
