"""Turning a positive annotation into a witness trace.

Pipeline: basis extraction, forced-order edges for lock-protected writes
(cyclic mode), a linear cycle precheck, transitive closure, a 2SAT
encoding of the remaining ordering choices, and a topological
linearization replayed into a trace.  The result's observation function
equals the annotation exactly, or Unrealizable says why none exists.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Optional, Union

from . import annotations as annot
from .model import (
    CommunicationGraph,
    InputError,
    Loc,
    Program,
    build_communication_graph,
    is_read,
    is_write,
)
from .execution import Trace, maximal_extension, replay


class RealizeInternalError(RuntimeError):
    """The assembled order failed to replay or missed the annotation; a
    bug, never an expected outcome."""


@dataclass(frozen=True)
class Unrealizable:
    reason: str  # "not-well-formed" | "cycle" | "unsat"
    detail: str = ""


@dataclass(frozen=True)
class RealizeMode:
    kind: str  # "acyclic" | "cyclic"
    adjacency: frozenset  # admissible process pairs (i, j), i < j
    protected_vars: frozenset = frozenset()


def acyclic_mode(program: Program) -> RealizeMode:
    graph = build_communication_graph(program)
    return RealizeMode("acyclic", frozenset(graph.edges))


def cyclic_mode(reduced: Program, cut_edges: frozenset, protected_vars: frozenset) -> RealizeMode:
    graph = build_communication_graph(reduced)
    return RealizeMode(
        "cyclic",
        frozenset(e for e in graph.edges if e not in cut_edges),
        protected_vars,
    )


# --------------------------------------------------------------------------
# Constraint graph with bitmask reachability
# --------------------------------------------------------------------------


class ConstraintGraph:
    """Directed graph over basis events; supports closure and cycle tests."""

    def __init__(self, nodes: list[int]):
        self.nodes = list(nodes)
        self.pos = {eid: i for i, eid in enumerate(nodes)}
        self.succ = [0] * len(nodes)  # bitmasks over node positions

    def add_edge(self, a: int, b: int) -> bool:
        i, j = self.pos[a], self.pos[b]
        bit = 1 << j
        if self.succ[i] & bit:
            return False
        self.succ[i] |= bit
        return True

    def has_edge(self, a: int, b: int) -> bool:
        return bool(self.succ[self.pos[a]] & (1 << self.pos[b]))

    def edge_list(self) -> list[tuple[int, int]]:
        out = []
        for i, mask in enumerate(self.succ):
            rest = mask
            while rest:
                j = (rest & -rest).bit_length() - 1
                rest &= rest - 1
                out.append((self.nodes[i], self.nodes[j]))
        return out

    def has_cycle(self) -> bool:
        n = len(self.nodes)
        color = [0] * n
        for start in range(n):
            if color[start]:
                continue
            stack = [(start, self.succ[start])]
            color[start] = 1
            while stack:
                node, rest = stack[-1]
                if rest:
                    j = (rest & -rest).bit_length() - 1
                    stack[-1] = (node, rest & (rest - 1))
                    if color[j] == 1:
                        return True
                    if color[j] == 0:
                        color[j] = 1
                        stack.append((j, self.succ[j]))
                else:
                    color[node] = 2
                    stack.pop()
        return False

    def copy(self) -> "ConstraintGraph":
        g = ConstraintGraph(self.nodes)
        g.succ = list(self.succ)
        return g


def transitive_closure(graph: ConstraintGraph) -> ConstraintGraph:
    """Reachability closure; per-node search, cyclic inputs allowed (a
    node on a cycle becomes self-reachable)."""
    closed = ConstraintGraph(graph.nodes)
    n = len(graph.nodes)
    for i in range(n):
        seen = 0
        frontier = graph.succ[i]
        while frontier:
            seen |= frontier
            nxt = 0
            rest = frontier
            while rest:
                j = (rest & -rest).bit_length() - 1
                rest &= rest - 1
                nxt |= graph.succ[j]
            frontier = nxt & ~seen
        closed.succ[i] = seen
    return closed


# --------------------------------------------------------------------------
# 2SAT instances
# --------------------------------------------------------------------------


@dataclass
class TwoSatInstance:
    """Implication-form 2SAT over ordering variables.

    Variables stand for undecided ordered event pairs; pairs already
    forced by the closure are carried as `fact_units`.  A literal is
    `var + 1` (pair ordered as stored) or `-(var + 1)` (flipped); clauses
    hold one or two literals, interpreted as a disjunction.
    """

    n_vars: int = 0
    clauses: list[tuple[int, ...]] = field(default_factory=list)
    pair_var: dict[tuple[int, int], int] = field(default_factory=dict)
    fact_units: list[tuple[int, int]] = field(default_factory=list)
    contradiction: bool = False  # a clause resolved to an empty disjunction

    def new_var(self, pair: Optional[tuple[int, int]] = None) -> int:
        v = self.n_vars
        self.n_vars += 1
        if pair is not None:
            self.pair_var[pair] = v
        return v

    def literal(self, pair: tuple[int, int]) -> Optional[int]:
        v = self.pair_var.get(pair)
        if v is not None:
            return v + 1
        v = self.pair_var.get((pair[1], pair[0]))
        if v is not None:
            return -(v + 1)
        return None

    def add_implication(self, a: int, b: int) -> None:
        self.clauses.append((-a, b))

    def add_unit(self, a: int) -> None:
        self.clauses.append((a,))

    def has_implication(self, ante: tuple[int, int], cons: tuple[int, int]) -> bool:
        a, b = self.literal(ante), self.literal(cons)
        if a is None or b is None:
            return False
        return (-a, b) in self.clauses or (-b, a) in self.clauses

    def to_dimacs(self) -> str:
        lines = [f"p cnf {self.n_vars} {len(self.clauses)}"]
        for cl in self.clauses:
            lines.append(" ".join(str(l) for l in cl) + " 0")
        return "\n".join(lines)


def twosat_solve(instance: TwoSatInstance) -> Optional[dict[int, bool]]:
    """Strongly-connected-component solution of the implication graph;
    deterministic; None when unsatisfiable."""
    if instance.contradiction:
        return None
    n = instance.n_vars
    # Literal node ids: var v true -> 2v, false -> 2v + 1.
    def node(lit: int) -> int:
        v = abs(lit) - 1
        return 2 * v if lit > 0 else 2 * v + 1

    def neg(x: int) -> int:
        return x ^ 1

    adj: list[list[int]] = [[] for _ in range(2 * n)]
    for cl in instance.clauses:
        if len(cl) == 1:
            (a,) = cl
            adj[neg(node(a))].append(node(a))
        else:
            a, b = cl
            adj[neg(node(a))].append(node(b))
            adj[neg(node(b))].append(node(a))

    index = [0] * (2 * n)
    low = [0] * (2 * n)
    on_stack = [False] * (2 * n)
    comp = [-1] * (2 * n)
    counter = [1]
    comp_count = [0]
    sstack: list[int] = []

    for root in range(2 * n):
        if index[root]:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                index[v] = low[v] = counter[0]
                counter[0] += 1
                sstack.append(v)
                on_stack[v] = True
            advanced = False
            while pi < len(adj[v]):
                w = adj[v][pi]
                pi += 1
                if not index[w]:
                    work[-1] = (v, pi)
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if low[v] == index[v]:
                while True:
                    w = sstack.pop()
                    on_stack[w] = False
                    comp[w] = comp_count[0]
                    if w == v:
                        break
                comp_count[0] += 1
            if work:
                u, _ = work[-1]
                low[u] = min(low[u], low[v])

    result: dict[int, bool] = {}
    for v in range(n):
        if comp[2 * v] == comp[2 * v + 1]:
            return None
        # Tarjan numbers components in reverse topological order (sinks
        # first); a literal is true when its component is topologically
        # later, i.e. has the smaller number.
        result[v] = comp[2 * v] < comp[2 * v + 1]
    return result


# --------------------------------------------------------------------------
# Encoding
# --------------------------------------------------------------------------

_TRUE = "T"
_FALSE = "F"


class _Encoder:
    def __init__(
        self,
        program: Program,
        basis: annot.Basis,
        closure: ConstraintGraph,
        positive: dict,
        mode: RealizeMode,
    ):
        self.program = program
        self.basis = basis
        self.closure = closure
        self.positive = positive
        self.mode = mode
        self.instance = TwoSatInstance()
        self.unsat = False
        self.pos = closure.pos
        self.succ = closure.succ
        n = len(closure.nodes)
        self.pred = [0] * n
        for i, mask in enumerate(self.succ):
            rest = mask
            while rest:
                j = (rest & -rest).bit_length() - 1
                rest &= rest - 1
                self.pred[j] |= 1 << i
        self._clauses: dict[tuple[int, ...], None] = {}

    def emit(self, clause: tuple[int, ...]) -> None:
        self._clauses[clause] = None

    def admissible(self, a: int, b: int) -> bool:
        ea, eb = self.program.event(a), self.program.event(b)
        if ea.is_init or eb.is_init:
            return True  # init writes are ordered facts anyway
        if ea.proc == eb.proc:
            return True
        pa, pb = ea.proc, eb.proc
        return (min(pa, pb), max(pa, pb)) in self.mode.adjacency

    def status(self, pair: tuple[int, int]):
        """A pair is a closure fact, the negation of one, a variable
        literal, or inexpressible (None)."""
        a, b = pair
        ia, ib = self.pos[a], self.pos[b]
        if self.succ[ia] & (1 << ib):
            return _TRUE
        if self.succ[ib] & (1 << ia):
            return _FALSE
        return self.instance.literal(pair)

    def build_variables(self) -> None:
        nodes = self.closure.nodes
        for i, a in enumerate(nodes):
            row = self.succ[i] | self.pred[i]
            for j in range(i + 1, len(nodes)):
                if row & (1 << j):
                    continue
                b = nodes[j]
                if self.admissible(a, b):
                    self.instance.new_var((a, b))
        for a, b in self.closure.edge_list():
            if a != b:
                self.instance.fact_units.append((a, b))

    def transitivity(self) -> None:
        # For a variable pair in either orientation, compose with closure
        # facts on both sides: x_{a,b} and (b,c) in E* give x_{a,c};
        # x_{a,b} and (c,a) in E* give x_{c,b}.
        nodes = self.closure.nodes
        for (a, b), v in list(self.instance.pair_var.items()):
            ia, ib = self.pos[a], self.pos[b]
            for x, ix, y, iy, lit in (
                (a, ia, b, ib, v + 1),
                (b, ib, a, ia, -(v + 1)),
            ):
                # Targets (x, c) for c past y; skip facts (x, c) in E*.
                rest = self.succ[iy] & ~self.succ[ix] & ~(1 << ix)
                if rest & self.pred[ix]:
                    # Some c both follows y and precedes x: forces the
                    # antecedent false, once is enough.
                    self.emit((-lit,))
                    rest &= ~self.pred[ix]
                while rest:
                    j = (rest & -rest).bit_length() - 1
                    rest &= rest - 1
                    other = self.instance.literal((x, nodes[j]))
                    if other is not None:
                        self.emit((-lit, other))
                # Targets (c, y) for c before x.
                rest = self.pred[ix] & ~self.pred[iy] & ~(1 << iy)
                if rest & self.succ[iy]:
                    self.emit((-lit,))
                    rest &= ~self.succ[iy]
                while rest:
                    j = (rest & -rest).bit_length() - 1
                    rest &= rest - 1
                    other = self.instance.literal((nodes[j], y))
                    if other is not None:
                        self.emit((-lit, other))

    def annotation_clauses(self) -> None:
        writes = [
            e
            for e in self.closure.nodes
            if is_write(self.program.event(e).label) or self.program.event(e).is_init
        ]
        for r, w in self.positive.items():
            r_loc = self.basis.locs[r]
            for w2 in writes:
                if w2 == w or w2 == r:
                    continue
                if not self.basis.locs[w2].overlaps(r_loc):
                    continue
                ante = self.status((w2, r))
                cons = self.status((w2, w))
                if ante is _FALSE:
                    continue
                if ante is _TRUE:
                    if cons is _TRUE:
                        continue
                    if cons is _FALSE:
                        self.unsat = True
                        return
                    if cons is None:
                        raise RealizeInternalError(
                            f"forced order ({w2}, {w}) is inexpressible"
                        )
                    self.emit((cons,))
                    continue
                if ante is None:
                    # Neither side of the disjunction is expressible; the
                    # lock-protection edges must have ordered these.
                    raise RealizeInternalError(
                        f"annotation constraint ({w2}, {r}, {w}) is inexpressible"
                    )
                if cons is _TRUE:
                    continue
                if cons is _FALSE:
                    self.emit((-ante,))
                    continue
                if cons is None:
                    raise RealizeInternalError(
                        f"annotation consequent ({w2}, {w}) is inexpressible"
                    )
                self.emit((-ante, cons))


def encode_2sat(
    closure: ConstraintGraph,
    positive: dict,
    program: Program,
    mode: RealizeMode,
    basis: annot.Basis,
) -> TwoSatInstance:
    """Clause groups: pair variables double as antisymmetry/totality,
    annotation clauses (first, they can refute the instance outright),
    transitivity against closure facts, and the closure's fact units."""
    enc = _Encoder(program, basis, closure, positive, mode)
    enc.build_variables()
    enc.annotation_clauses()
    if not enc.unsat:
        enc.transitivity()
    enc.instance.clauses.extend(enc._clauses)
    enc.instance.contradiction = enc.unsat
    return enc.instance


# --------------------------------------------------------------------------
# Realize
# --------------------------------------------------------------------------


def _protection_edges(
    graph: ConstraintGraph,
    closure: ConstraintGraph,
    positive: dict,
    basis: annot.Basis,
    program: Program,
    protected: frozenset,
) -> Optional[ConstraintGraph]:
    """Forced orderings against lock-protected conflicting writes, applied
    to fixpoint; returns the updated closure, or None on a cycle."""
    writes = [
        e
        for e in graph.nodes
        if (is_write(program.event(e).label) or program.event(e).is_init)
    ]
    while True:
        added = False
        for r, w in positive.items():
            r_loc = basis.locs[r]
            for w2 in writes:
                if w2 in (w, r):
                    continue
                if basis.locs[w2].name not in protected:
                    continue
                if not basis.locs[w2].overlaps(r_loc):
                    continue
                if closure.has_edge(w, w2):
                    added |= graph.add_edge(r, w2)
                elif closure.has_edge(w2, r):
                    added |= graph.add_edge(w2, w)
        if not added:
            return closure if not graph.has_cycle() else None
        if graph.has_cycle():
            return None
        closure = transitive_closure(graph)


def covers_required_reads(program: Program, positive: dict) -> bool:
    """Cheap necessary condition for well-formedness: every read that
    lies on all paths to an annotated event must itself be annotated."""
    for e in set(positive) | set(positive.values()):
        for r in program.must_reads(e):
            if r not in positive:
                return False
    return True


def realize(
    program: Program, positive: dict, mode: RealizeMode
) -> Union[Trace, Unrealizable]:
    """Produce a trace whose observation function equals the annotation,
    or Unrealizable; deterministic."""
    if not covers_required_reads(program, positive):
        return Unrealizable("not-well-formed", "uncovered read on a replay path")
    try:
        basis = annot.compute_basis(program, positive)
    except annot.NotWellFormed as e:
        return Unrealizable("not-well-formed", str(e))

    init_ids = [e.eid for e in program.init_events]
    nodes = init_ids + [
        eid for eid in basis.global_event_ids() if eid not in set(init_ids)
    ]
    graph = ConstraintGraph(nodes)
    node_set = set(nodes)
    by_proc: dict[int, list[int]] = {}
    for seq in basis.sequences:
        for entry in seq:
            if entry.loc is not None:
                by_proc.setdefault(program.event(entry.eid).proc, []).append(entry.eid)
    for init_eid in init_ids:
        for other in nodes:
            if other != init_eid and not program.event(other).is_init:
                graph.add_edge(init_eid, other)
    for a, b in zip(init_ids, init_ids[1:]):
        graph.add_edge(a, b)
    for eids in by_proc.values():
        # A basis sequence is one CFG path, so its order is the program
        # structure restricted to this process.
        for i, a in enumerate(eids):
            for b in eids[i + 1:]:
                graph.add_edge(a, b)
    for r, w in positive.items():
        if w in node_set and r in node_set:
            graph.add_edge(w, r)

    if graph.has_cycle():
        return Unrealizable("cycle")
    closure = transitive_closure(graph)

    if mode.kind == "cyclic" and mode.protected_vars:
        closure = _protection_edges(
            graph, closure, positive, basis, program, mode.protected_vars
        )
        if closure is None:
            return Unrealizable("cycle", "lock-protection edges")

    instance = encode_2sat(closure, positive, program, mode, basis)
    if instance.contradiction:
        return Unrealizable("unsat")
    assignment = twosat_solve(instance)
    if assignment is None:
        return Unrealizable("unsat")

    final = graph.copy()
    for (a, b), v in instance.pair_var.items():
        if assignment[v]:
            final.add_edge(a, b)
        else:
            final.add_edge(b, a)
    if final.has_cycle():
        raise RealizeInternalError("satisfying assignment induced a cyclic order")

    order = _toposort_min_id(final)
    try:
        trace = replay(program, order)
    except Exception as e:  # noqa: BLE001 - surfaced as an implementation bug
        raise RealizeInternalError(f"assembled order failed to replay: {e}") from e
    if trace.observation() != dict(positive):
        raise RealizeInternalError("realized trace does not match the annotation")
    return trace


def _toposort_min_id(graph: ConstraintGraph) -> list[int]:
    n = len(graph.nodes)
    indeg = [0] * n
    for mask in graph.succ:
        rest = mask
        while rest:
            j = (rest & -rest).bit_length() - 1
            rest &= rest - 1
            indeg[j] += 1
    heap = [graph.nodes[i] for i in range(n) if indeg[i] == 0]
    heapq.heapify(heap)
    out = []
    while heap:
        eid = heapq.heappop(heap)
        out.append(eid)
        i = graph.pos[eid]
        rest = graph.succ[i]
        while rest:
            j = (rest & -rest).bit_length() - 1
            rest &= rest - 1
            indeg[j] -= 1
            if indeg[j] == 0:
                heapq.heappush(heap, graph.nodes[j])
    if len(out) != n:
        raise RealizeInternalError("toposort on a cyclic graph")
    return out
