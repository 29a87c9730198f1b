"""Static program model: processes as acyclic CFGs over typed events.

Processes communicate through global scalar variables, global arrays
(one named location family each, cells resolved at runtime) and locks.
Event ids are dense and globally unique: the synthesized initialization
writes come first, then each process's events in CFG construction order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

WORD_MASK = (1 << 64) - 1
WORD_SIGN = 1 << 63


def wrap64(value: int) -> int:
    """Wrap an int to 64-bit two's complement."""
    value &= WORD_MASK
    return value - (1 << 64) if value & WORD_SIGN else value


class InputError(ValueError):
    """Bad argument to a model-level operation (unknown event, wrong kind)."""


class ModelError(RuntimeError):
    """A program violated a model invariant at runtime (deadlock, bounds)."""


# --------------------------------------------------------------------------
# Expressions over process-local variables
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Lit:
    value: int


@dataclass(frozen=True)
class Local:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # '!' or '-'
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str  # + - * == != < <= && ||
    left: "Expr"
    right: "Expr"


Expr = Union[Lit, Local, Unary, Binary]


def eval_expr(expr: Expr, env: dict[str, int]) -> int:
    """Evaluate an expression under a local valuation; 64-bit wrapping."""
    if isinstance(expr, Lit):
        return wrap64(expr.value)
    if isinstance(expr, Local):
        return env[expr.name]
    if isinstance(expr, Unary):
        v = eval_expr(expr.operand, env)
        if expr.op == "!":
            return 0 if v else 1
        if expr.op == "-":
            return wrap64(-v)
        raise InputError(f"unknown unary operator {expr.op!r}")
    if isinstance(expr, Binary):
        a = eval_expr(expr.left, env)
        if expr.op == "&&":
            return 1 if (a and eval_expr(expr.right, env)) else 0
        if expr.op == "||":
            return 1 if (a or eval_expr(expr.right, env)) else 0
        b = eval_expr(expr.right, env)
        if expr.op == "+":
            return wrap64(a + b)
        if expr.op == "-":
            return wrap64(a - b)
        if expr.op == "*":
            return wrap64(a * b)
        if expr.op == "==":
            return 1 if a == b else 0
        if expr.op == "!=":
            return 1 if a != b else 0
        if expr.op == "<":
            return 1 if a < b else 0
        if expr.op == "<=":
            return 1 if a <= b else 0
        raise InputError(f"unknown binary operator {expr.op!r}")
    raise InputError(f"not an expression: {expr!r}")


def expr_locals(expr: Expr) -> set[str]:
    if isinstance(expr, Local):
        return {expr.name}
    if isinstance(expr, Unary):
        return expr_locals(expr.operand)
    if isinstance(expr, Binary):
        return expr_locals(expr.left) | expr_locals(expr.right)
    return set()


def negate(expr: Expr) -> Expr:
    """Structural negation; `negate(negate(e))` is `e` again."""
    if isinstance(expr, Unary) and expr.op == "!":
        return expr.operand
    return Unary("!", expr)


# --------------------------------------------------------------------------
# Event labels
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Read:
    target: str
    var: str
    index: Optional[Expr] = None


@dataclass(frozen=True)
class Write:
    var: str
    index: Optional[Expr]
    value: Expr


@dataclass(frozen=True)
class Acquire:
    lock: str


@dataclass(frozen=True)
class Release:
    lock: str


@dataclass(frozen=True)
class Branch:
    guard: Expr
    # Nonzero when this is the failing arm of an assert statement.
    assert_id: Optional[str] = None


@dataclass(frozen=True)
class LocalAssign:
    target: str
    value: Expr


EventLabel = Union[Read, Write, Acquire, Release, Branch, LocalAssign]

READS = (Read, Acquire)
WRITES = (Write, Release)


def is_visible(label: EventLabel) -> bool:
    return isinstance(label, (Read, Write, Acquire, Release))


def is_read(label: EventLabel) -> bool:
    return isinstance(label, READS)


def is_write(label: EventLabel) -> bool:
    return isinstance(label, WRITES)


@dataclass(frozen=True)
class Loc:
    """A resolved memory location: (family name, cell index).

    Scalars and locks use index None.  An array access resolves to a cell
    index; an array's initialization write uses index None and stands for
    the whole family.
    """

    name: str
    index: Optional[int] = None

    def overlaps(self, other: "Loc") -> bool:
        if self.name != other.name:
            return False
        if self.index is None or other.index is None:
            return True
        return self.index == other.index

    def __str__(self) -> str:
        return self.name if self.index is None else f"{self.name}[{self.index}]"


@dataclass(frozen=True)
class Event:
    eid: int
    proc: int  # process index; init writes carry proc 0 by attribution
    label: EventLabel
    src: int = -1  # CFG nodes; -1 for init writes
    dst: int = -1
    is_init: bool = False

    def location_family(self) -> Optional[str]:
        lab = self.label
        if isinstance(lab, Read):
            return lab.var
        if isinstance(lab, Write):
            return lab.var
        if isinstance(lab, (Acquire, Release)):
            return lab.lock
        return None

    def describe(self) -> str:
        lab = self.label
        if self.is_init:
            return f"init {self.location_family()}"
        if isinstance(lab, Read):
            return f"{lab.target} = read {lab.var}"
        if isinstance(lab, Write):
            return f"write {lab.var}"
        if isinstance(lab, Acquire):
            return f"acquire {lab.lock}"
        if isinstance(lab, Release):
            return f"release {lab.lock}"
        if isinstance(lab, Branch):
            return "branch"
        return f"local {lab.target}"


# --------------------------------------------------------------------------
# Program
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GlobalDecl:
    name: str
    size: Optional[int]  # None: scalar; N: array with N cells
    init: int = 0


@dataclass
class Process:
    name: str
    # Node 0 is the root.  edges[n] lists outgoing events of node n in
    # construction order (branch arms keep their source order).
    num_nodes: int
    edges: list[Event] = field(default_factory=list)
    locals_init: dict[str, int] = field(default_factory=dict)

    def out_edges(self, node: int) -> list[Event]:
        return [e for e in self.edges if e.src == node]


class Program:
    """An immutable compiled program: declarations plus one CFG per process.

    Event ids are assigned here: one init write per global and per lock
    first, then process events in construction order.  Callers may pin ids
    by passing events with nonnegative ids (`n_pinned_init` init events
    keep ids 0..n-1); remaining events get fresh ids past the pinned ones.
    """

    def __init__(
        self,
        globals_: Sequence[GlobalDecl],
        locks: Sequence[str],
        processes: Sequence[Process],
        name: str = "program",
        n_pinned_init: int = 0,
    ) -> None:
        self.name = name
        self.globals = list(globals_)
        self.locks = list(locks)
        self.processes = list(processes)

        init_labels: list[EventLabel] = []
        for g in self.globals:
            init_labels.append(Write(g.name, None, Lit(g.init)))
        for lk in self.locks:
            init_labels.append(Release(lk))

        pinned = {e.eid for p in self.processes for e in p.edges if e.eid >= 0}
        pinned |= set(range(n_pinned_init))
        fresh = itertools.count(max(pinned) + 1 if pinned else 0)

        def take(eid: int) -> int:
            return eid if eid >= 0 else next(fresh)

        self.init_events = [
            Event(take(i if i < n_pinned_init else -1), 0, lab, is_init=True)
            for i, lab in enumerate(init_labels)
        ]
        self.events: dict[int, Event] = {e.eid: e for e in self.init_events}
        renumbered: list[Process] = []
        for pi, proc in enumerate(self.processes):
            new_edges = []
            for ev in proc.edges:
                ev2 = Event(take(ev.eid), pi, ev.label, ev.src, ev.dst)
                new_edges.append(ev2)
                if ev2.eid in self.events:
                    raise InputError(f"duplicate event id {ev2.eid}")
                self.events[ev2.eid] = ev2
            renumbered.append(
                Process(proc.name, proc.num_nodes, new_edges, dict(proc.locals_init))
            )
        self.processes = renumbered

        self._global_decl = {g.name: g for g in self.globals}
        self._ps_cache: dict[tuple[int, int], bool] = {}
        self._must_reads = None
        self._out: list[dict[int, list[Event]]] = []
        for proc in self.processes:
            out: dict[int, list[Event]] = {}
            for ev in proc.edges:
                out.setdefault(ev.src, []).append(ev)
            self._out.append(out)

        # Node reachability per process, for the program-structure order.
        self._node_reach: list[dict[int, frozenset[int]]] = []
        for pi, proc in enumerate(self.processes):
            reach: dict[int, set[int]] = {n: set() for n in range(proc.num_nodes)}
            order = self._topo_nodes(pi)
            for n in reversed(order):
                acc: set[int] = set()
                for ev in self._out[pi].get(n, []):
                    acc.add(ev.dst)
                    acc |= reach[ev.dst]
                reach[n] = acc
            self._node_reach.append({n: frozenset(s) for n, s in reach.items()})

        self.validate()

    # -- structure helpers --------------------------------------------------

    def _topo_nodes(self, pi: int) -> list[int]:
        proc = self.processes[pi]
        indeg = {n: 0 for n in range(proc.num_nodes)}
        for ev in proc.edges:
            indeg[ev.dst] += 1
        stack = [n for n in range(proc.num_nodes) if indeg[n] == 0]
        order = []
        while stack:
            n = stack.pop()
            order.append(n)
            for ev in self._out[pi].get(n, []):
                indeg[ev.dst] -= 1
                if indeg[ev.dst] == 0:
                    stack.append(ev.dst)
        if len(order) != proc.num_nodes:
            raise InputError(f"process {proc.name}: control-flow graph has a cycle")
        return order

    def event(self, eid: int) -> Event:
        try:
            return self.events[eid]
        except KeyError:
            raise InputError(f"unknown event id {eid}") from None

    def must_reads(self, eid: int) -> frozenset:
        """Reads that occur on every CFG path from the root to the event."""
        if self._must_reads is None:
            out: dict[int, frozenset] = {}
            for pi, proc in enumerate(self.processes):
                mr: dict[int, frozenset] = {0: frozenset()}
                for node in self._topo_nodes(pi):
                    for ev in self._out[pi].get(node, []):
                        contrib = mr[node] | (
                            frozenset([ev.eid]) if is_read(ev.label) else frozenset()
                        )
                        prev = mr.get(ev.dst)
                        mr[ev.dst] = contrib if prev is None else prev & contrib
                for ev in proc.edges:
                    out[ev.eid] = mr[ev.src]
            for ev in self.init_events:
                out[ev.eid] = frozenset()
            self._must_reads = out
        return self._must_reads[eid]

    def out_edges(self, pi: int, node: int) -> list[Event]:
        return self._out[pi].get(node, [])

    def global_decl(self, name: str) -> GlobalDecl:
        return self._global_decl[name]

    def is_lock(self, name: str) -> bool:
        return name in self.locks

    def n_init(self) -> int:
        return len(self.init_events)

    def global_events(self) -> list[Event]:
        return [e for e in self.events.values() if is_visible(e.label) or e.is_init]

    # -- validation ----------------------------------------------------------

    def validate(self) -> None:
        names = [g.name for g in self.globals] + self.locks
        if len(set(names)) != len(names):
            raise InputError("duplicate global or lock declaration")
        for pi, proc in enumerate(self.processes):
            self._topo_nodes(pi)
            seen_from_root = {0}
            frontier = [0]
            while frontier:
                n = frontier.pop()
                for ev in self._out[pi].get(n, []):
                    if ev.dst not in seen_from_root:
                        seen_from_root.add(ev.dst)
                        frontier.append(ev.dst)
            if seen_from_root != set(range(proc.num_nodes)):
                raise InputError(f"process {proc.name}: unreachable nodes")
            for n in range(proc.num_nodes):
                out = self._out[pi].get(n, [])
                if len(out) >= 2:
                    if not all(isinstance(e.label, Branch) for e in out):
                        raise InputError(
                            f"process {proc.name}: node {n} mixes branch and plain edges"
                        )
                    for e in out:
                        if len(self._out[pi].get(e.dst, [])) >= 2:
                            raise InputError(
                                f"process {proc.name}: branching node follows branching node"
                            )
                    self._check_exclusive([e.label.guard for e in out], proc.name)
            self._check_locks(pi)

    def _check_exclusive(self, guards: list[Expr], pname: str) -> None:
        # Guards produced by compilation are complement trees: either a
        # pair (g, !g), or conjunctions splitting on a complementary pair
        # of leading atoms (the shape branch contraction produces).
        def complement(a: Expr, b: Expr) -> bool:
            return negate(a) == b or negate(b) == a

        def exclusive(gs: list[Expr]) -> bool:
            if len(gs) <= 1:
                return True
            if len(gs) == 2 and complement(gs[0], gs[1]):
                return True
            heads: dict[Expr, list[Optional[Expr]]] = {}
            for g in gs:
                if isinstance(g, Binary) and g.op == "&&":
                    heads.setdefault(g.left, []).append(g.right)
                else:
                    heads.setdefault(g, []).append(None)
            keys = list(heads)
            if len(keys) != 2 or not complement(keys[0], keys[1]):
                return False
            for rest in heads.values():
                if None in rest:
                    if len(rest) != 1:
                        return False
                elif not exclusive([r for r in rest if r is not None]):
                    return False
            return True

        if not exclusive(guards):
            raise InputError(f"process {pname}: branch guards are not exclusive")

    def _check_locks(self, pi: int) -> None:
        # Along every root-to-leaf path, operations on each lock alternate
        # acquire/release starting with acquire and ending balanced.
        # Memoized on (node, held) so nested branches stay linear.
        proc = self.processes[pi]
        seen: set[tuple[int, frozenset[str]]] = set()
        stack: list[tuple[int, frozenset[str]]] = [(0, frozenset())]
        while stack:
            node, held = stack.pop()
            if (node, held) in seen:
                continue
            seen.add((node, held))
            out = self._out[pi].get(node, [])
            if not out and held:
                raise InputError(
                    f"process {proc.name}: lock(s) {sorted(held)} not released "
                    "on some path"
                )
            for ev in out:
                h = held
                if isinstance(ev.label, Acquire):
                    if ev.label.lock in h:
                        raise InputError(
                            f"process {proc.name}: acquire of held lock {ev.label.lock}"
                        )
                    h = h | {ev.label.lock}
                elif isinstance(ev.label, Release):
                    if ev.label.lock not in h:
                        raise InputError(
                            f"process {proc.name}: release of free lock {ev.label.lock}"
                        )
                    h = h - {ev.label.lock}
                stack.append((ev.dst, h))


# --------------------------------------------------------------------------
# Program structure and conflicts
# --------------------------------------------------------------------------


def program_structure_leq(program: Program, e1: int, e2: int) -> bool:
    """Strict program-structure order: init writes before every process
    event, and intra-process CFG-path order.  Memoized per program."""
    cache = program._ps_cache
    key = (e1, e2)
    hit = cache.get(key)
    if hit is not None:
        return hit
    a = program.event(e1)
    b = program.event(e2)
    if a.is_init:
        out = not b.is_init
    elif b.is_init or a.proc != b.proc or a.eid == b.eid:
        out = False
    else:
        reach = program._node_reach[a.proc]
        out = a.dst == b.src or b.src in reach[a.dst]
    cache[key] = out
    return out


def conflicting(program: Program, e1: int, e2: int, loc1: Loc, loc2: Loc) -> bool:
    """Two global events conflict when they touch the same resolved
    location and at least one writes it."""
    a = program.event(e1)
    b = program.event(e2)
    for ev in (a, b):
        if not (is_visible(ev.label) or ev.is_init):
            raise InputError(f"event {ev.eid} is invisible and has no location")
    if not loc1.overlaps(loc2):
        return False
    return is_write(a.label) or is_write(b.label)


# --------------------------------------------------------------------------
# Communication graph
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CommunicationGraph:
    num_procs: int
    # Edge labels keyed by (i, j) with i < j: shared variable/lock families.
    labels: dict[tuple[int, int], frozenset[str]]

    @property
    def edges(self) -> list[tuple[int, int]]:
        return sorted(self.labels)

    def label(self, i: int, j: int) -> frozenset[str]:
        return self.labels.get((min(i, j), max(i, j)), frozenset())


EdgeSet = frozenset  # of (i, j) process pairs with i < j


def build_communication_graph(program: Program) -> CommunicationGraph:
    touched: list[set[str]] = []
    for pi, proc in enumerate(program.processes):
        fam: set[str] = set()
        for ev in proc.edges:
            f = ev.location_family()
            if f is not None:
                fam.add(f)
        touched.append(fam)
    labels: dict[tuple[int, int], frozenset[str]] = {}
    for i in range(len(touched)):
        for j in range(i + 1, len(touched)):
            shared = touched[i] & touched[j]
            if shared:
                labels[(i, j)] = frozenset(shared)
    return CommunicationGraph(len(program.processes), labels)


def is_acyclic(graph: CommunicationGraph) -> bool:
    parent = list(range(graph.num_procs))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in graph.edges:
        ri, rj = find(i), find(j)
        if ri == rj:
            return False
        parent[ri] = rj
    return True


def simple_cycles(graph: CommunicationGraph) -> list[list[tuple[int, int]]]:
    """All simple cycles as edge lists; exhaustive, for small graphs."""
    adj: dict[int, set[int]] = {i: set() for i in range(graph.num_procs)}
    for i, j in graph.edges:
        adj[i].add(j)
        adj[j].add(i)
    cycles = []
    seen_keys = set()

    def extend(path: list[int]) -> None:
        last = path[-1]
        for nxt in sorted(adj[last]):
            if nxt == path[0] and len(path) >= 3:
                key = frozenset(
                    (min(a, b), max(a, b)) for a, b in zip(path, path[1:] + [path[0]])
                )
                if key not in seen_keys:
                    seen_keys.add(key)
                    cycles.append(sorted(key))
            elif nxt not in path and nxt > path[0]:
                extend(path + [nxt])

    for start in range(graph.num_procs):
        extend([start])
    return cycles


def is_all_but_two_cycle_set(graph: CommunicationGraph, edges: EdgeSet) -> bool:
    """Check that every simple cycle has at most two edges outside `edges`."""
    return all(
        sum(1 for e in cyc if tuple(e) not in edges) <= 2 for cyc in simple_cycles(graph)
    )


def all_but_two_cycle_set(graph: CommunicationGraph) -> EdgeSet:
    """Deterministic choice: for a cyclic graph, all edges except the two
    lexicographically smallest; empty for an acyclic graph."""
    if is_acyclic(graph):
        return frozenset()
    edges = graph.edges
    if len(edges) <= 2:
        return frozenset()
    return frozenset(edges[2:])


# --------------------------------------------------------------------------
# Acyclic reduction: wrap writes to selected variables in fresh locks
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AcyclicReduction:
    program: Program
    cut_edges: EdgeSet
    protected_vars: frozenset[str]
    observable_locks: frozenset[str]
    # Original write event id -> wrap lock name, in the reduced program.
    write_locks: dict[int, str]
    # Protected family -> "cell" (per-cell locks) or "family" (one lock).
    lock_plan: dict[str, str]


def reduction_lock_plan(program: Program, protected: set[str]) -> dict[str, str]:
    """Lock granularity per protected family: an array whose writes all
    use literal indices gets one lock per written cell; anything else
    (scalars, dynamically indexed writes) gets one lock per family."""
    plan: dict[str, str] = {}
    for g in sorted(protected):
        decl = next((d for d in program.globals if d.name == g), None)
        if decl is None or decl.size is None:
            plan[g] = "family"
            continue
        writes = [
            ev.label
            for ev in program.events.values()
            if isinstance(ev.label, Write) and ev.label.var == g and not ev.is_init
        ]
        plan[g] = "cell" if all(isinstance(w.index, Lit) for w in writes) else "family"
    return plan


def acyclic_reduction(program: Program, cut_edges: EdgeSet) -> AcyclicReduction:
    """Wrap every write to a variable labeling a cut edge in an
    acquire/release pair on a fresh lock: one per scalar variable, one per
    statically written array cell.

    Original event ids are preserved; the fresh lock events and the new
    locks' init writes get ids past the original range.
    """
    graph = build_communication_graph(program)
    protected: set[str] = set()
    for i, j in cut_edges:
        protected |= graph.label(i, j)
    plan = reduction_lock_plan(program, protected)

    def wrap_lock(lab: Write) -> str:
        if plan[lab.var] == "cell":
            return f"_wr_{lab.var}_{lab.index.value}"
        return f"_wr_{lab.var}"

    new_lock_names: list[str] = []
    write_locks: dict[int, str] = {}
    new_procs: list[Process] = []
    for pi, proc in enumerate(program.processes):
        next_node = proc.num_nodes
        edges: list[Event] = []
        for ev in proc.edges:
            lab = ev.label
            if isinstance(lab, Write) and lab.var in protected:
                lk = wrap_lock(lab)
                if lk not in new_lock_names:
                    new_lock_names.append(lk)
                mid1, mid2 = next_node, next_node + 1
                next_node += 2
                edges.append(Event(-1, pi, Acquire(lk), ev.src, mid1))
                edges.append(Event(ev.eid, pi, lab, mid1, mid2))
                edges.append(Event(-1, pi, Release(lk), mid2, ev.dst))
                write_locks[ev.eid] = lk
            else:
                edges.append(Event(ev.eid, pi, lab, ev.src, ev.dst))
        new_procs.append(Process(proc.name, next_node, edges, dict(proc.locals_init)))

    new_lock_names.sort()
    for lk in new_lock_names:
        if lk in program.locks or any(g.name == lk for g in program.globals):
            raise InputError(f"reduction lock name {lk} collides with a declaration")
    reduced = Program(
        program.globals,
        program.locks + new_lock_names,
        new_procs,
        name=program.name + "+locks",
        n_pinned_init=program.n_init(),
    )
    return AcyclicReduction(
        reduced,
        cut_edges,
        frozenset(protected),
        frozenset(new_lock_names),
        write_locks,
        plan,
    )
