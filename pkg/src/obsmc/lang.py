"""Text DSL for concurrent programs (`.cmp` files).

Line/brace based, `#` comments, whitespace-insensitive.  See docs/lang.md
for the grammar.  `compile` unrolls `repeat` loops, turns `if` into a
branching node with complementary guards, lowers `assert e` to a branch
whose failing arm leads to a violation sink, and contracts branch-to-branch
edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from . import model
from .model import (
    Acquire,
    Binary,
    Branch,
    Event,
    Expr,
    GlobalDecl,
    Lit,
    Local,
    LocalAssign,
    Process,
    Program,
    Read,
    Release,
    Unary,
    Write,
    negate,
)


@dataclass(frozen=True)
class Diagnostic:
    line: int
    col: int
    message: str

    def __str__(self) -> str:
        return f"{self.line}:{self.col}: {self.message}"


class ParseError(ValueError):
    def __init__(self, diag: Diagnostic):
        super().__init__(str(diag))
        self.diag = diag


# --------------------------------------------------------------------------
# AST
# --------------------------------------------------------------------------


@dataclass
class SRead:
    target: str
    var: str
    index: Optional[Expr]


@dataclass
class SWrite:
    var: str
    index: Optional[Expr]
    value: Expr


@dataclass
class SAcquire:
    lock: str


@dataclass
class SRelease:
    lock: str


@dataclass
class SLocal:
    target: str
    value: Expr


@dataclass
class SIf:
    cond: Expr
    then: list
    els: list


@dataclass
class SRepeat:
    count: int
    body: list


@dataclass
class SAssert:
    cond: Expr


Stmt = Union[SRead, SWrite, SAcquire, SRelease, SLocal, SIf, SRepeat, SAssert]


@dataclass
class AstProcess:
    name: str
    body: list


@dataclass
class Ast:
    globals_: list[GlobalDecl]
    locks: list[str]
    processes: list[AstProcess]
    name: str = "program"


# --------------------------------------------------------------------------
# Lexer
# --------------------------------------------------------------------------

KEYWORDS = {
    "global", "lock", "process", "read", "write", "acquire", "release",
    "local", "if", "else", "repeat", "assert",
}

SYMBOLS = ["==", "!=", "<=", "&&", "||", "{", "}", "[", "]", "(", ")",
           "=", "<", "+", "-", "*", "!"]


@dataclass(frozen=True)
class Token:
    kind: str  # 'ident', 'int', 'sym', 'kw', 'eof'
    text: str
    line: int
    col: int


def _lex(source: str) -> list[Token]:
    tokens = []
    line, col = 1, 1
    i = 0
    n = len(source)
    while i < n:
        c = source[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            text = source[i:j]
            tokens.append(Token("kw" if text in KEYWORDS else "ident", text, line, col))
            col += j - i
            i = j
            continue
        if c.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            tokens.append(Token("int", source[i:j], line, col))
            col += j - i
            i = j
            continue
        for sym in SYMBOLS:
            if source.startswith(sym, i):
                tokens.append(Token("sym", sym, line, col))
                i += len(sym)
                col += len(sym)
                break
        else:
            raise ParseError(Diagnostic(line, col, f"unexpected character {c!r}"))
    tokens.append(Token("eof", "", line, col))
    return tokens


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[Token], name: str):
        self.toks = tokens
        self.pos = 0
        self.name = name

    def peek(self) -> Token:
        return self.toks[self.pos]

    def next(self) -> Token:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def fail(self, expected: str) -> ParseError:
        t = self.peek()
        got = t.text or "end of input"
        return ParseError(Diagnostic(t.line, t.col, f"expected {expected}, got {got!r}"))

    def expect(self, kind: str, text: Optional[str] = None) -> Token:
        t = self.peek()
        if t.kind != kind or (text is not None and t.text != text):
            raise self.fail(text or kind)
        return self.next()

    def at(self, kind: str, text: Optional[str] = None) -> bool:
        t = self.peek()
        return t.kind == kind and (text is None or t.text == text)

    # -- grammar -------------------------------------------------------------

    def program(self) -> Ast:
        ast = Ast([], [], [], self.name)
        declared: set[str] = set()
        while not self.at("eof"):
            if self.at("kw", "global"):
                t = self.next()
                ident = self.expect("ident")
                size = None
                if self.at("sym", "["):
                    self.next()
                    size = int(self.expect("int").text)
                    self.expect("sym", "]")
                    if size <= 0:
                        raise ParseError(
                            Diagnostic(ident.line, ident.col, "array size must be positive")
                        )
                init = 0
                if self.at("sym", "="):
                    self.next()
                    neg = False
                    if self.at("sym", "-"):
                        self.next()
                        neg = True
                    init = int(self.expect("int").text)
                    if neg:
                        init = -init
                if ident.text in declared:
                    raise ParseError(
                        Diagnostic(ident.line, ident.col, f"duplicate declaration of {ident.text}")
                    )
                declared.add(ident.text)
                ast.globals_.append(GlobalDecl(ident.text, size, model.wrap64(init)))
            elif self.at("kw", "lock"):
                self.next()
                ident = self.expect("ident")
                if ident.text in declared:
                    raise ParseError(
                        Diagnostic(ident.line, ident.col, f"duplicate declaration of {ident.text}")
                    )
                declared.add(ident.text)
                ast.locks.append(ident.text)
            elif self.at("kw", "process"):
                self.next()
                ident = self.expect("ident")
                if any(p.name == ident.text for p in ast.processes):
                    raise ParseError(
                        Diagnostic(ident.line, ident.col, f"duplicate process {ident.text}")
                    )
                self.expect("sym", "{")
                body = self.block()
                ast.processes.append(AstProcess(ident.text, body))
            else:
                raise self.fail("'global', 'lock' or 'process'")
        self._resolve(ast)
        return ast

    def block(self) -> list[Stmt]:
        stmts: list[Stmt] = []
        while not self.at("sym", "}"):
            stmts.append(self.stmt())
        self.expect("sym", "}")
        return stmts

    def stmt(self) -> Stmt:
        tok = self.peek()
        s = self._stmt_inner()
        s.pos = (tok.line, tok.col)
        return s

    def _stmt_inner(self) -> Stmt:
        if self.at("kw", "write"):
            self.next()
            var = self.expect("ident").text
            index = None
            if self.at("sym", "["):
                self.next()
                index = self.expr()
                self.expect("sym", "]")
            self.expect("sym", "=")
            return SWrite(var, index, self.expr())
        if self.at("kw", "acquire"):
            self.next()
            return SAcquire(self.expect("ident").text)
        if self.at("kw", "release"):
            self.next()
            return SRelease(self.expect("ident").text)
        if self.at("kw", "local"):
            self.next()
            target = self.expect("ident").text
            self.expect("sym", "=")
            return SLocal(target, self.expr())
        if self.at("kw", "if"):
            self.next()
            cond = self.expr()
            self.expect("sym", "{")
            then = self.block()
            els: list[Stmt] = []
            if self.at("kw", "else"):
                self.next()
                self.expect("sym", "{")
                els = self.block()
            return SIf(cond, then, els)
        if self.at("kw", "repeat"):
            self.next()
            count = int(self.expect("int").text)
            self.expect("sym", "{")
            return SRepeat(count, self.block())
        if self.at("kw", "assert"):
            self.next()
            return SAssert(self.expr())
        if self.at("ident"):
            target = self.next().text
            self.expect("sym", "=")
            self.expect("kw", "read")
            var = self.expect("ident").text
            index = None
            if self.at("sym", "["):
                self.next()
                index = self.expr()
                self.expect("sym", "]")
            return SRead(target, var, index)
        raise self.fail("a statement")

    # Precedence: || < && < (== !=) < (< <=) < (+ -) < * < unary
    def expr(self) -> Expr:
        return self._or()

    def _or(self) -> Expr:
        e = self._and()
        while self.at("sym", "||"):
            self.next()
            e = Binary("||", e, self._and())
        return e

    def _and(self) -> Expr:
        e = self._eq()
        while self.at("sym", "&&"):
            self.next()
            e = Binary("&&", e, self._eq())
        return e

    def _eq(self) -> Expr:
        e = self._rel()
        while self.at("sym", "==") or self.at("sym", "!="):
            op = self.next().text
            e = Binary(op, e, self._rel())
        return e

    def _rel(self) -> Expr:
        e = self._add()
        while self.at("sym", "<") or self.at("sym", "<="):
            op = self.next().text
            e = Binary(op, e, self._add())
        return e

    def _add(self) -> Expr:
        e = self._mul()
        while self.at("sym", "+") or self.at("sym", "-"):
            op = self.next().text
            e = Binary(op, e, self._mul())
        return e

    def _mul(self) -> Expr:
        e = self._unary()
        while self.at("sym", "*"):
            self.next()
            e = Binary("*", e, self._unary())
        return e

    def _unary(self) -> Expr:
        if self.at("sym", "!"):
            self.next()
            return Unary("!", self._unary())
        if self.at("sym", "-"):
            self.next()
            return Unary("-", self._unary())
        return self._atom()

    def _atom(self) -> Expr:
        if self.at("int"):
            return Lit(int(self.next().text))
        if self.at("ident"):
            return Local(self.next().text)
        if self.at("sym", "("):
            self.next()
            e = self.expr()
            self.expect("sym", ")")
            return e
        raise self.fail("an expression")

    # -- name resolution -----------------------------------------------------

    def _resolve(self, ast: Ast) -> None:
        globals_ = {g.name: g for g in ast.globals_}
        locks = set(ast.locks)

        def check(stmts: list[Stmt]) -> None:
            for s in stmts:
                line, col = getattr(s, "pos", (0, 0))
                if isinstance(s, (SRead, SWrite)):
                    if s.var in locks:
                        raise ParseError(
                            Diagnostic(line, col, f"{s.var} is a lock; use acquire/release")
                        )
                    if s.var not in globals_:
                        raise ParseError(
                            Diagnostic(line, col, f"undeclared global {s.var}")
                        )
                    decl = globals_[s.var]
                    if s.index is not None and decl.size is None:
                        raise ParseError(
                            Diagnostic(line, col, f"index expression on non-array {s.var}")
                        )
                    if s.index is None and decl.size is not None:
                        raise ParseError(
                            Diagnostic(line, col, f"array {s.var} needs an index expression")
                        )
                elif isinstance(s, (SAcquire, SRelease)):
                    if s.lock not in locks:
                        raise ParseError(Diagnostic(line, col, f"undeclared lock {s.lock}"))
                elif isinstance(s, SIf):
                    check(s.then)
                    check(s.els)
                elif isinstance(s, SRepeat):
                    check(s.body)

        for proc in ast.processes:
            check(proc.body)


def parse(source: str, name: str = "program") -> Ast:
    """Parse DSL text; raises ParseError with line/column diagnostics."""
    return _Parser(_lex(source), name).program()


# --------------------------------------------------------------------------
# Compiler
# --------------------------------------------------------------------------


class _CfgBuilder:
    def __init__(self, pname: str):
        self.pname = pname
        self.n_nodes = 1  # node 0 is the root
        self.edges: list[tuple[int, int, object]] = []  # (src, dst, label)
        self.locals: dict[str, int] = {}
        self.assert_count = 0

    def fresh(self) -> int:
        n = self.n_nodes
        self.n_nodes += 1
        return n

    def note_locals(self, expr: Expr) -> None:
        for name in model.expr_locals(expr):
            self.locals.setdefault(name, 0)

    def build(self, stmts: list[Stmt], entry: int) -> int:
        node = entry
        for s in stmts:
            node = self.one(s, node)
        return node

    def one(self, s: Stmt, entry: int) -> int:
        if isinstance(s, SRead):
            self.locals.setdefault(s.target, 0)
            if s.index is not None:
                self.note_locals(s.index)
            dst = self.fresh()
            self.edges.append((entry, dst, Read(s.target, s.var, s.index)))
            return dst
        if isinstance(s, SWrite):
            if s.index is not None:
                self.note_locals(s.index)
            self.note_locals(s.value)
            dst = self.fresh()
            self.edges.append((entry, dst, Write(s.var, s.index, s.value)))
            return dst
        if isinstance(s, SAcquire):
            dst = self.fresh()
            self.edges.append((entry, dst, Acquire(s.lock)))
            return dst
        if isinstance(s, SRelease):
            dst = self.fresh()
            self.edges.append((entry, dst, Release(s.lock)))
            return dst
        if isinstance(s, SLocal):
            self.locals.setdefault(s.target, 0)
            self.note_locals(s.value)
            dst = self.fresh()
            self.edges.append((entry, dst, LocalAssign(s.target, s.value)))
            return dst
        if isinstance(s, SIf):
            self.note_locals(s.cond)
            t0 = self.fresh()
            e0 = self.fresh()
            self.edges.append((entry, t0, Branch(s.cond)))
            self.edges.append((entry, e0, Branch(negate(s.cond))))
            tx = self.build(s.then, t0)
            ex = self.build(s.els, e0)
            # Merge both arm exits into one join node.
            join = tx
            if ex != tx:
                self.edges = [
                    (src, join if dst == ex else dst, lab) for src, dst, lab in self.edges
                ]
            return join
        if isinstance(s, SRepeat):
            node = entry
            for _ in range(s.count):
                node = self.build(s.body, node)
            return node
        if isinstance(s, SAssert):
            self.note_locals(s.cond)
            self.assert_count += 1
            aid = f"{self.pname}:a{self.assert_count}"
            cont = self.fresh()
            sink = self.fresh()
            self.edges.append((entry, cont, Branch(s.cond)))
            self.edges.append((entry, sink, Branch(negate(s.cond), assert_id=aid)))
            return cont
        raise TypeError(f"unknown statement {s!r}")

    def contract_branch_chains(self) -> None:
        # A branch edge into a branching node is replaced by the composed
        # guard edges; the model forbids branch-to-branch successors.
        while True:
            out: dict[int, list[int]] = {}
            for i, (src, dst, lab) in enumerate(self.edges):
                out.setdefault(src, []).append(i)
            target = None
            for i, (src, dst, lab) in enumerate(self.edges):
                if isinstance(lab, Branch) and len(out.get(dst, [])) >= 2:
                    target = i
                    break
            if target is None:
                return
            src, mid, lab = self.edges[target]
            composed = []
            for j in out[mid]:
                s2, d2, lab2 = self.edges[j]
                composed.append(
                    (src, d2, Branch(Binary("&&", lab.guard, lab2.guard), lab2.assert_id))
                )
            del self.edges[target]
            self.edges.extend(composed)
            self.cleanup()

    def cleanup(self) -> None:
        reachable = {0}
        changed = True
        while changed:
            changed = False
            for src, dst, _ in self.edges:
                if src in reachable and dst not in reachable:
                    reachable.add(dst)
                    changed = True
        self.edges = [e for e in self.edges if e[0] in reachable]

    def finish(self) -> Process:
        self.cleanup()
        # Dense node ids in topological order (root stays 0), and edges in
        # (topological source, construction) order for reproducible ids.
        nodes = {0}
        for src, dst, _ in self.edges:
            nodes.add(src)
            nodes.add(dst)
        indeg = {n: 0 for n in nodes}
        for _, dst, _ in self.edges:
            indeg[dst] += 1
        order: list[int] = []
        frontier = sorted(n for n in nodes if indeg[n] == 0)
        while frontier:
            n = frontier.pop(0)
            order.append(n)
            for src, dst, _ in self.edges:
                if src == n:
                    indeg[dst] -= 1
                    if indeg[dst] == 0:
                        frontier.append(dst)
        remap = {old: new for new, old in enumerate(order)}
        topo_idx = {old: i for i, old in enumerate(order)}
        indexed = sorted(
            range(len(self.edges)),
            key=lambda i: (topo_idx[self.edges[i][0]], i),
        )
        events = [
            Event(-1, -1, self.edges[i][2], remap[self.edges[i][0]], remap[self.edges[i][1]])
            for i in indexed
        ]
        return Process(self.pname, len(nodes), events, dict(self.locals))


def compile(ast: Ast) -> Program:
    """Lower an AST to a loop-free program with synthesized init writes."""
    procs = []
    for ap in ast.processes:
        b = _CfgBuilder(ap.name)
        b.build(ap.body, 0)
        b.contract_branch_chains()
        procs.append(b.finish())
    return Program(ast.globals_, ast.locks, procs, name=ast.name)


def compile_source(source: str, name: str = "program") -> Program:
    return compile(parse(source, name))


# --------------------------------------------------------------------------
# Renderer
# --------------------------------------------------------------------------


def render_expr(e: Expr, prec: int = 0) -> str:
    # Precedence levels: || 1, && 2, ==/!= 3, </<= 4, +/- 5, * 6, unary 7
    if isinstance(e, Lit):
        return str(e.value)
    if isinstance(e, Local):
        return e.name
    if isinstance(e, Unary):
        inner = render_expr(e.operand, 7)
        return f"{e.op}{inner}"
    levels = {"||": 1, "&&": 2, "==": 3, "!=": 3, "<": 4, "<=": 4, "+": 5, "-": 5, "*": 6}
    lv = levels[e.op]
    text = f"{render_expr(e.left, lv)} {e.op} {render_expr(e.right, lv + 1)}"
    return f"({text})" if lv < prec else text


def _postdominators(proc: Process) -> dict[int, Optional[int]]:
    """Immediate postdominator per node, with a virtual exit for leaves."""
    exit_node = -1
    out: dict[int, list[int]] = {n: [] for n in range(proc.num_nodes)}
    for ev in proc.edges:
        out[ev.src].append(ev.dst)
    succs = {
        n: (out[n] if out[n] else [exit_node]) for n in range(proc.num_nodes)
    }
    all_nodes = set(range(proc.num_nodes)) | {exit_node}
    pdom: dict[int, set[int]] = {n: set(all_nodes) for n in range(proc.num_nodes)}
    pdom[exit_node] = {exit_node}
    changed = True
    while changed:
        changed = False
        for n in range(proc.num_nodes):
            acc = set.intersection(*(pdom[s] for s in succs[n])) | {n}
            if acc != pdom[n]:
                pdom[n] = acc
                changed = True
    ipdom: dict[int, Optional[int]] = {}
    for n in range(proc.num_nodes):
        cands = pdom[n] - {n}
        best = None
        for c in cands:
            # The immediate postdominator is the candidate every other
            # candidate postdominates.
            if all(d == c or d in pdom[c] for d in cands):
                best = c
                break
        ipdom[n] = best
    return ipdom


def _render_process(program: Program, pi: int, out: list[str]) -> None:
    proc = program.processes[pi]
    ipdom = _postdominators(proc)
    edges_of: dict[int, list[Event]] = {}
    for ev in proc.edges:
        edges_of.setdefault(ev.src, []).append(ev)

    def emit_stmt(ev: Event, depth: int) -> None:
        pad = "  " * depth
        lab = ev.label
        if isinstance(lab, Read):
            idx = f"[{render_expr(lab.index)}]" if lab.index is not None else ""
            out.append(f"{pad}{lab.target} = read {lab.var}{idx}")
        elif isinstance(lab, Write):
            idx = f"[{render_expr(lab.index)}]" if lab.index is not None else ""
            out.append(f"{pad}write {lab.var}{idx} = {render_expr(lab.value)}")
        elif isinstance(lab, Acquire):
            out.append(f"{pad}acquire {lab.lock}")
        elif isinstance(lab, Release):
            out.append(f"{pad}release {lab.lock}")
        elif isinstance(lab, LocalAssign):
            out.append(f"{pad}local {lab.target} = {render_expr(lab.value)}")

    def assert_shape(arms: list[Event]) -> Optional[tuple[Event, Event]]:
        # (continue arm, sink arm) when this branch came from an assert.
        if len(arms) != 2:
            return None
        for a, b in ((arms[0], arms[1]), (arms[1], arms[0])):
            if b.label.assert_id is not None and not edges_of.get(b.dst):
                return a, b
        return None

    def emit_arms(arms: list[Event], join: Optional[int], depth: int) -> None:
        pad = "  " * depth
        if len(arms) == 2:
            pos, neg_arm = arms
            out.append(f"{pad}if {render_expr(pos.label.guard)} {{")
            walk(pos.dst, join, depth + 1)
            out.append(f"{pad}}} else {{")
            walk(neg_arm.dst, join, depth + 1)
            out.append(f"{pad}}}")
            return
        # Contracted multi-arm branch: re-nest on the leading conjunct.
        groups: dict[object, list[Event]] = {}
        for a in arms:
            g = a.label.guard
            head, rest = (g.left, g.right) if isinstance(g, Binary) and g.op == "&&" else (g, None)
            groups.setdefault(head, []).append(
                a if rest is None else Event(a.eid, a.proc, Branch(rest, a.label.assert_id), a.src, a.dst)
            )
        keys = sorted(groups, key=lambda k: isinstance(k, Unary))
        pos_key, neg_key = keys[0], keys[1]
        pad = "  " * depth

        def group_shape(g: list[Event]) -> frozenset:
            return frozenset((render_expr(a.label.guard), a.dst) for a in g)

        if group_shape(groups[pos_key]) == group_shape(groups[neg_key]):
            # Both sides continue identically: this came from an `if` with
            # empty arms followed by another branch.  Un-contract it.
            out.append(f"{pad}if {render_expr(pos_key)} {{")
            out.append(f"{pad}}} else {{")
            out.append(f"{pad}}}")
            emit_group(groups[pos_key], join, depth)
            return
        out.append(f"{pad}if {render_expr(pos_key)} {{")
        emit_group(groups[pos_key], join, depth + 1)
        out.append(f"{pad}}} else {{")
        emit_group(groups[neg_key], join, depth + 1)
        out.append(f"{pad}}}")

    def emit_group(arms: list[Event], join: Optional[int], depth: int) -> None:
        if len(arms) == 1:
            walk(arms[0].dst, join, depth)
        else:
            emit_arms(arms, join, depth)

    def walk(node: Optional[int], stop: Optional[int], depth: int) -> None:
        while node != stop and node != -1 and node is not None:
            arms = edges_of.get(node, [])
            if not arms:
                return
            if len(arms) == 1:
                emit_stmt(arms[0], depth)
                node = arms[0].dst
            else:
                shape = assert_shape(arms)
                if shape is not None:
                    cont, _sink = shape
                    out.append("  " * depth + f"assert {render_expr(cont.label.guard)}")
                    node = cont.dst
                    continue
                join = ipdom[node]
                emit_arms(arms, join, depth)
                node = join

    out.append(f"process {proc.name} {{")
    walk(0, None, 1)
    out.append("}")


def render(program: Program) -> str:
    """Render back to DSL text; the compile of the result is isomorphic."""
    out: list[str] = []
    for g in program.globals:
        size = f"[{g.size}]" if g.size is not None else ""
        out.append(f"global {g.name}{size} = {g.init}")
    for lk in program.locks:
        out.append(f"lock {lk}")
    for pi in range(len(program.processes)):
        out.append("")
        _render_process(program, pi, out)
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# Structural comparison (round-trip checks)
# --------------------------------------------------------------------------


def canonical_form(program: Program) -> tuple:
    """Event-id-independent structural fingerprint of a program."""

    def label_key(lab) -> tuple:
        if isinstance(lab, Read):
            return ("read", lab.target, lab.var, render_expr(lab.index) if lab.index else "")
        if isinstance(lab, Write):
            return (
                "write",
                lab.var,
                render_expr(lab.index) if lab.index else "",
                render_expr(lab.value),
            )
        if isinstance(lab, Acquire):
            return ("acquire", lab.lock)
        if isinstance(lab, Release):
            return ("release", lab.lock)
        if isinstance(lab, Branch):
            return ("branch", render_expr(lab.guard), lab.assert_id or "")
        return ("local", lab.target, render_expr(lab.value))

    procs = []
    for pi, proc in enumerate(program.processes):
        order: dict[int, int] = {0: 0}
        lines = []
        stack = [0]
        edges_of: dict[int, list[Event]] = {}
        for ev in proc.edges:
            edges_of.setdefault(ev.src, []).append(ev)
        while stack:
            n = stack.pop()
            for ev in sorted(edges_of.get(n, []), key=lambda e: label_key(e.label)):
                if ev.dst not in order:
                    order[ev.dst] = len(order)
                    stack.append(ev.dst)
                lines.append((order[n], label_key(ev.label), order[ev.dst]))
        procs.append((proc.name, tuple(sorted(lines))))
    return (
        tuple((g.name, g.size, g.init) for g in program.globals),
        tuple(program.locks),
        tuple(procs),
    )


def isomorphic(p1: Program, p2: Program) -> bool:
    return canonical_form(p1) == canonical_form(p2)
