"""Sequentially consistent interpreter: states, traces, observations.

Scheduling is invisibly maximal: after the initialization writes and after
every visible (global) event, each process eagerly runs its enabled
invisible events (branches and local assignments).  Traces record all
executed events; observation functions, conflicts and happens-before are
defined over the global projection only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .model import (
    Acquire,
    Branch,
    Event,
    InputError,
    Loc,
    LocalAssign,
    ModelError,
    Program,
    Read,
    Release,
    Write,
    eval_expr,
    is_read,
    is_visible,
    is_write,
)

STEP_CAP = 10**6


class NotEnabled(RuntimeError):
    def __init__(self, index: int, eid: int, why: str) -> None:
        super().__init__(f"event {eid} at position {index} not enabled: {why}")
        self.index = index
        self.eid = eid


@dataclass(frozen=True)
class GlobalState:
    """Snapshot of an execution state; a value type."""

    values: dict[str, object]  # name -> int for scalars/locks(0/1), tuple for arrays
    pcs: tuple[int, ...]
    locals_: tuple[dict[str, int], ...]

    def lock_held(self, lock: str) -> bool:
        return bool(self.values[lock])

    def value_of(self, name: str, index: Optional[int] = None):
        v = self.values[name]
        return v if index is None else v[index]


@dataclass(frozen=True)
class TraceEntry:
    eid: int
    proc: int
    loc: Optional[Loc]  # None for invisible events
    value: Optional[int]


class Trace:
    """A replay-validated event sequence starting with the init writes."""

    def __init__(self, program: Program, entries: list[TraceEntry], end: GlobalState):
        self.program = program
        self.entries = entries
        self.end_state = end
        self.index: dict[int, int] = {e.eid: i for i, e in enumerate(entries)}
        self._obs: Optional[dict[int, int]] = None

    def __len__(self) -> int:
        return len(self.entries)

    def events(self) -> set[int]:
        return set(self.index)

    def global_projection(self) -> list[int]:
        return [e.eid for e in self.entries if e.loc is not None]

    def visible_entries(self) -> list[TraceEntry]:
        return [e for e in self.entries if e.loc is not None]

    def value_of(self, eid: int) -> int:
        entry = self.entries[self.index[eid]]
        if entry.value is None:
            raise InputError(f"event {eid} is invisible and has no value")
        return entry.value

    def loc_of(self, eid: int) -> Loc:
        entry = self.entries[self.index[eid]]
        if entry.loc is None:
            raise InputError(f"event {eid} is invisible and has no location")
        return entry.loc

    def is_maximal(self) -> bool:
        return not enabled_events(self.program, self.end_state)

    def observation(self) -> dict[int, int]:
        """Map each read (lock acquires included) to the write it saw."""
        if self._obs is None:
            obs: dict[int, int] = {}
            last: dict[tuple[str, Optional[int]], int] = {}
            for e in self.entries:
                if e.loc is None:
                    continue
                ev = self.program.event(e.eid)
                key = (e.loc.name, e.loc.index)
                if is_read(ev.label):
                    obs[e.eid] = last.get(key, last.get((e.loc.name, None)))
                else:
                    last[key] = e.eid
            self._obs = obs
        return self._obs

    def dump(self) -> str:
        lines = []
        for i, e in enumerate(self.entries):
            ev = self.program.event(e.eid)
            kind = type(ev.label).__name__.lower()
            loc = str(e.loc) if e.loc is not None else "-"
            val = e.value if e.value is not None else "-"
            lines.append(f"{i} p{e.proc + 1} e{e.eid} {kind} {loc} {val}")
        return "\n".join(lines)


# --------------------------------------------------------------------------
# Mutable execution cursor (shared engine for the pure API and the oracle)
# --------------------------------------------------------------------------

_MISSING = object()


class Cursor:
    """Mutable interpreter state with undo, for cheap depth-first search."""

    def __init__(self, program: Program):
        self.program = program
        self.vals: dict[str, object] = {}
        self.pcs = [0] * len(program.processes)
        self.locals: list[dict[str, int]] = [
            dict(p.locals_init) for p in program.processes
        ]
        self.entries: list[TraceEntry] = []
        # Last writer per resolved location; array init keyed (name, None).
        self.last_write: dict[tuple[str, Optional[int]], int] = {}
        for g in program.globals:
            self.vals[g.name] = g.init if g.size is None else [g.init] * g.size
        for lk in program.locks:
            self.vals[lk] = 0
        for ev in program.init_events:
            fam = ev.location_family()
            stored = self.vals[fam]
            value = program.global_decl(fam).init if isinstance(stored, list) else stored
            self.entries.append(TraceEntry(ev.eid, ev.proc, Loc(fam, None), value))
            self.last_write[(fam, None)] = ev.eid
        self.settle()

    @classmethod
    def from_state(cls, program: Program, state: GlobalState, entries: list[TraceEntry]):
        cur = cls.__new__(cls)
        cur.program = program
        cur.vals = {
            k: (list(v) if isinstance(v, tuple) else v) for k, v in state.values.items()
        }
        cur.pcs = list(state.pcs)
        cur.locals = [dict(d) for d in state.locals_]
        cur.entries = list(entries)
        cur.last_write = {}
        for e in cur.entries:
            if e.loc is not None:
                ev = program.event(e.eid)
                if is_write(ev.label):
                    cur.last_write[(e.loc.name, e.loc.index)] = e.eid
        return cur

    def snapshot(self) -> GlobalState:
        vals = {
            k: (tuple(v) if isinstance(v, list) else v) for k, v in self.vals.items()
        }
        return GlobalState(vals, tuple(self.pcs), tuple(dict(d) for d in self.locals))

    def to_trace(self) -> Trace:
        return Trace(self.program, list(self.entries), self.snapshot())

    # -- event execution ---------------------------------------------------

    def resolve_loc(self, ev: Event) -> Loc:
        lab = ev.label
        if isinstance(lab, (Acquire, Release)):
            return Loc(lab.lock, None)
        var = lab.var  # type: ignore[union-attr]
        index = getattr(lab, "index", None)
        if index is None:
            return Loc(var, None)
        idx = eval_expr(index, self.locals[ev.proc])
        decl = self.program.global_decl(var)
        if decl.size is None:
            raise ModelError(f"indexed access to scalar {var}")
        if not 0 <= idx < decl.size:
            raise ModelError(f"array index out of bounds: {var}[{idx}]")
        return Loc(var, idx)

    def enabled_of_process(self, pi: int) -> Optional[Event]:
        out = self.program.out_edges(pi, self.pcs[pi])
        if not out:
            return None
        if len(out) == 1:
            ev = out[0]
            if isinstance(ev.label, Acquire) and self.vals[ev.label.lock]:
                return None
            if isinstance(ev.label, Branch):
                if not eval_expr(ev.label.guard, self.locals[pi]):
                    return None
            return ev
        for ev in out:
            if eval_expr(ev.label.guard, self.locals[pi]):
                return ev
        return None

    def execute(self, ev: Event) -> tuple:
        """Run one enabled event; returns an undo token."""
        pi = ev.proc
        lab = ev.label
        prev_pc = self.pcs[pi]
        self.pcs[pi] = ev.dst
        if isinstance(lab, Read):
            loc = self.resolve_loc(ev)
            store = self.vals[loc.name]
            value = store[loc.index] if loc.index is not None else store
            env = self.locals[pi]
            prev = env.get(lab.target, _MISSING)
            env[lab.target] = value
            self.entries.append(TraceEntry(ev.eid, pi, loc, value))
            return ("r", pi, prev_pc, lab.target, prev)
        if isinstance(lab, Write):
            loc = self.resolve_loc(ev)
            value = eval_expr(lab.value, self.locals[pi])
            key = (loc.name, loc.index)
            prev_w = self.last_write.get(key, _MISSING)
            if loc.index is not None:
                prev = self.vals[loc.name][loc.index]
                self.vals[loc.name][loc.index] = value
            else:
                prev = self.vals[loc.name]
                self.vals[loc.name] = value
            self.last_write[key] = ev.eid
            self.entries.append(TraceEntry(ev.eid, pi, loc, value))
            return ("w", pi, prev_pc, key, prev, prev_w)
        if isinstance(lab, Acquire):
            self.vals[lab.lock] = 1
            self.entries.append(TraceEntry(ev.eid, pi, Loc(lab.lock, None), 1))
            return ("a", pi, prev_pc, lab.lock)
        if isinstance(lab, Release):
            key = (lab.lock, None)
            prev_w = self.last_write.get(key, _MISSING)
            self.vals[lab.lock] = 0
            self.last_write[key] = ev.eid
            self.entries.append(TraceEntry(ev.eid, pi, Loc(lab.lock, None), 0))
            return ("q", pi, prev_pc, lab.lock, prev_w)
        if isinstance(lab, Branch):
            self.entries.append(TraceEntry(ev.eid, pi, None, None))
            return ("b", pi, prev_pc)
        # LocalAssign
        env = self.locals[pi]
        prev = env.get(lab.target, _MISSING)
        env[lab.target] = eval_expr(lab.value, env)
        self.entries.append(TraceEntry(ev.eid, pi, None, None))
        return ("l", pi, prev_pc, lab.target, prev)

    def revert(self, token: tuple) -> None:
        kind, pi, prev_pc = token[0], token[1], token[2]
        self.pcs[pi] = prev_pc
        self.entries.pop()
        if kind == "r":
            _, _, _, target, prev = token
            if prev is _MISSING:
                del self.locals[pi][target]
            else:
                self.locals[pi][target] = prev
        elif kind == "w":
            _, _, _, key, prev, prev_w = token
            if key[1] is not None:
                self.vals[key[0]][key[1]] = prev
            else:
                self.vals[key[0]] = prev
            if prev_w is _MISSING:
                del self.last_write[key]
            else:
                self.last_write[key] = prev_w
        elif kind == "a":
            self.vals[token[3]] = 0
        elif kind == "q":
            _, _, _, lock, prev_w = token
            self.vals[lock] = 1
            key = (lock, None)
            if prev_w is _MISSING:
                del self.last_write[key]
            else:
                self.last_write[key] = prev_w
        elif kind == "l":
            _, _, _, target, prev = token
            if prev is _MISSING:
                del self.locals[pi][target]
            else:
                self.locals[pi][target] = prev

    def settle(self) -> list[tuple]:
        """Eagerly run every enabled invisible event, lowest process first."""
        tokens = []
        for pi in range(len(self.pcs)):
            while True:
                ev = self.enabled_of_process(pi)
                if ev is None or is_visible(ev.label):
                    break
                tokens.append(self.execute(ev))
        return tokens

    def step_visible(self, ev: Event) -> list[tuple]:
        tokens = [self.execute(ev)]
        tokens.extend(self.settle())
        return tokens

    def revert_all(self, tokens: list[tuple]) -> None:
        for t in reversed(tokens):
            self.revert(t)

    def enabled_visible(self) -> list[Event]:
        out = []
        for pi in range(len(self.pcs)):
            ev = self.enabled_of_process(pi)
            if ev is not None and is_visible(ev.label):
                out.append(ev)
        return out

    def last_writer(self, loc: Loc) -> int:
        # A cell write is newer than the whole-array init whenever present.
        key = (loc.name, loc.index)
        if key in self.last_write:
            return self.last_write[key]
        return self.last_write[(loc.name, None)]


# --------------------------------------------------------------------------
# Pure operations
# --------------------------------------------------------------------------


def initial_state(program: Program) -> GlobalState:
    """State before any process event: counters at roots, init values set."""
    return _fresh_unsettled(program)


def _fresh_unsettled(program: Program) -> GlobalState:
    vals: dict[str, object] = {}
    for g in program.globals:
        vals[g.name] = g.init if g.size is None else tuple([g.init] * g.size)
    for lk in program.locks:
        vals[lk] = 0
    return GlobalState(
        vals,
        tuple([0] * len(program.processes)),
        tuple(dict(p.locals_init) for p in program.processes),
    )


def enabled_events(program: Program, state: GlobalState) -> set[int]:
    """Enabled events, at most one per process."""
    cur = Cursor.from_state(program, state, [])
    out = set()
    for pi in range(len(program.processes)):
        ev = cur.enabled_of_process(pi)
        if ev is not None:
            out.add(ev.eid)
    return out


def step(program: Program, state: GlobalState, eid: int) -> GlobalState:
    """Execute one enabled event; invisible events advance local state only."""
    ev = program.event(eid)
    cur = Cursor.from_state(program, state, [])
    enabled = cur.enabled_of_process(ev.proc)
    if enabled is None or enabled.eid != eid:
        raise NotEnabled(0, eid, "process cannot take this event here")
    cur.execute(ev)
    return cur.snapshot()


def replay(program: Program, events: Sequence[int]) -> Trace:
    """Run a schedule of global events (init-write prefix included),
    auto-inserting invisible events after each one."""
    n_init = program.n_init()
    init_ids = [e.eid for e in program.init_events]
    if list(events[:n_init]) != init_ids:
        raise NotEnabled(0, events[0] if events else -1, "missing init-write prefix")
    cur = Cursor(program)
    for pos, eid in enumerate(events[n_init:], start=n_init):
        ev = program.event(eid)
        if not is_visible(ev.label):
            raise InputError(f"schedule may only list global events, got {eid}")
        enabled = cur.enabled_of_process(ev.proc)
        if enabled is None or enabled.eid != eid:
            raise NotEnabled(pos, eid, "not enabled at this point")
        cur.step_visible(ev)
        if len(cur.entries) > STEP_CAP:
            raise ModelError("step cap exceeded")
    return cur.to_trace()


def maximal_extension(trace: Trace) -> Trace:
    """Extend until no event is enabled, lowest process id first.

    Maximal traces are checked lock-free: a deadlocked extension raises.
    """
    cur = Cursor.from_state(trace.program, trace.end_state, trace.entries)
    steps = 0
    while True:
        choices = cur.enabled_visible()
        if not choices:
            break
        ev = min(choices, key=lambda e: (e.proc, e.eid))
        cur.step_visible(ev)
        steps += 1
        if steps > STEP_CAP:
            raise ModelError("step cap exceeded")
    for lk in trace.program.locks:
        if cur.vals[lk]:
            raise ModelError(f"deadlock: maximal trace ends with lock {lk} held")
    return cur.to_trace()


def observation_function(trace: Trace) -> dict[int, int]:
    return dict(trace.observation())


def happens_before(trace: Trace) -> frozenset[tuple[int, int]]:
    """Smallest transitive order containing all same-process and all
    conflicting pairs of global events, in trace order."""
    entries = trace.visible_entries()
    n = len(entries)
    direct = [0] * n
    for j in range(n):
        ej = entries[j]
        for i in range(j):
            ei = entries[i]
            if ei.proc == ej.proc:
                direct[i] |= 1 << j
                continue
            ev_i = trace.program.event(ei.eid)
            ev_j = trace.program.event(ej.eid)
            if ei.loc.overlaps(ej.loc) and (
                is_write(ev_i.label) or is_write(ev_j.label)
            ):
                direct[i] |= 1 << j
    reach = [0] * n
    for i in range(n - 1, -1, -1):
        acc = direct[i]
        rest = direct[i]
        while rest:
            j = (rest & -rest).bit_length() - 1
            rest &= rest - 1
            acc |= reach[j]
        reach[i] = acc
    pairs = set()
    for i in range(n):
        rest = reach[i]
        while rest:
            j = (rest & -rest).bit_length() - 1
            rest &= rest - 1
            pairs.add((entries[i].eid, entries[j].eid))
    return frozenset(pairs)


def dependent_pairs(trace: Trace) -> frozenset[tuple[int, int]]:
    """Directly dependent ordered pairs (no transitive closure); the
    canonical reordering-equivalence key together with the event set."""
    entries = trace.visible_entries()
    pairs = set()
    for j in range(len(entries)):
        ej = entries[j]
        ev_j = trace.program.event(ej.eid)
        for i in range(j):
            ei = entries[i]
            if ei.proc == ej.proc:
                pairs.add((ei.eid, ej.eid))
                continue
            ev_i = trace.program.event(ei.eid)
            if ei.loc.overlaps(ej.loc) and (is_write(ev_i.label) or is_write(ev_j.label)):
                pairs.add((ei.eid, ej.eid))
    return frozenset(pairs)


def project(trace: Trace, keep: Iterable[int]) -> list[int]:
    keep = set(keep)
    return [e.eid for e in trace.entries if e.eid in keep]
