"""Property parsing and checking over an explored state graph.

Five property kinds: absent, present, deadlockfree, leadsto-within and
always-implies-eventually. Predicates are boolean combinations of atoms
over node locations, return statuses, state variables, process locals
and root termination.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field

from .explore import StateGraph, Trace, find_path
from .model import ComposedModel, Status


class PropertyError(Exception):
    pass


class UnknownName(PropertyError):
    pass


class PropParseError(PropertyError):
    def __init__(self, message, line, col):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


# --------------------------------------------------------------------------
# predicate AST

@dataclass(frozen=True)
class NodeAt:
    node: str
    location: str


@dataclass(frozen=True)
class SvEq:
    sv: str
    value: str


@dataclass(frozen=True)
class SvCmp:
    sv: str
    op: str
    value: int


@dataclass(frozen=True)
class RStatusEq:
    node: str
    status: str


@dataclass(frozen=True)
class LocalCmp:
    node: str
    var: str
    op: str
    value: int


@dataclass(frozen=True)
class RootTerminal:
    status: str


@dataclass(frozen=True)
class And:
    items: tuple


@dataclass(frozen=True)
class Or:
    items: tuple


@dataclass(frozen=True)
class NotP:
    item: object


_CMP = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    ">": lambda a, b: a > b,
    "<=": lambda a, b: a <= b,
    ">=": lambda a, b: a >= b,
}

_STATUS = {
    "none": Status.NO_RET,
    "no_ret": Status.NO_RET,
    "success": Status.SUCCESS,
    "failure": Status.FAILURE,
    "running": Status.RUNNING,
    "halt_me": Status.HALT_ME,
}


def _node_info(model, name):
    try:
        return model.node(name)
    except KeyError:
        raise UnknownName(f"unknown node '{name}'") from None


def _sv_slot(model, name):
    try:
        return model.sv(name)
    except KeyError:
        raise UnknownName(f"unknown state variable '{name}'") from None


def compile_predicate(pred, model: ComposedModel):
    """Resolve names against the model and return a closure over state cells."""
    if isinstance(pred, NodeAt):
        info = _node_info(model, pred.node)
        proc = model.processes[info.process]
        cell = proc.loc_cell
        try:
            want = proc.loc_index(pred.location)
        except (KeyError, ValueError):
            raise UnknownName(
                f"node '{pred.node}' has no location '{pred.location}'"
            ) from None
        return lambda s: s[cell] == want
    if isinstance(pred, SvEq):
        slot = _sv_slot(model, pred.sv)
        cell = slot.cell
        try:
            want = slot.encode(pred.value if slot.values else int(pred.value))
        except (ValueError, KeyError):
            raise UnknownName(
                f"'{pred.value}' is not a value of sv '{pred.sv}'") from None
        return lambda s: s[cell] == want
    if isinstance(pred, SvCmp):
        slot = _sv_slot(model, pred.sv)
        if slot.values is not None:
            raise UnknownName(f"sv '{pred.sv}' is enumerated; ordering "
                              "comparisons need a numeric sv")
        cell, op, want = slot.cell, _CMP[pred.op], pred.value
        return lambda s: op(slot.decode(s[cell]), want)
    if isinstance(pred, RStatusEq):
        info = _node_info(model, pred.node)
        cell = info.rstatus_cell
        try:
            want = _STATUS[pred.status.lower()]
        except KeyError:
            raise UnknownName(f"unknown status '{pred.status}'") from None
        return lambda s: s[cell] == want
    if isinstance(pred, LocalCmp):
        proc = model.processes[_node_info(model, pred.node).process]
        if pred.var not in proc.locals:
            raise UnknownName(
                f"process '{pred.node}' has no local '{pred.var}'")
        cell, op, want = proc.locals[pred.var], _CMP[pred.op], pred.value
        return lambda s: op(s[cell], want)
    if isinstance(pred, RootTerminal):
        try:
            want = _STATUS[pred.status.lower()]
        except KeyError:
            raise UnknownName(f"unknown status '{pred.status}'") from None
        return lambda s: model.terminal_status(s) == want
    if isinstance(pred, And):
        fns = [compile_predicate(p, model) for p in pred.items]
        return lambda s: all(f(s) for f in fns)
    if isinstance(pred, Or):
        fns = [compile_predicate(p, model) for p in pred.items]
        return lambda s: any(f(s) for f in fns)
    if isinstance(pred, NotP):
        fn = compile_predicate(pred.item, model)
        return lambda s: not fn(s)
    raise TypeError(f"not a predicate: {pred!r}")


# --------------------------------------------------------------------------
# property AST

ABSENT = "absent"
PRESENT = "present"
DEADLOCKFREE = "deadlockfree"
LEADSTO = "leadsto"
IMPLIES_EVENTUALLY = "implies_eventually"


@dataclass
class Property:
    name: str
    kind: str
    p: object = None
    q: object = None
    lo: int = 0
    hi: int = 0
    expect: bool | None = None


@dataclass
class Verdict:
    prop: Property
    value: str  # "TRUE" | "FALSE" | "UNKNOWN"
    seconds: float = 0.0
    witness: Trace | None = None
    reason: str = ""

    def report_line(self, witness_path=None):
        # Timing is kept off the line so reports are reproducible bytes.
        parts = [self.prop.name, self.value]
        if witness_path:
            parts.append(str(witness_path))
        if self.reason:
            parts.append(f"({self.reason})")
        return " ".join(parts)

    @property
    def matches_expectation(self):
        if self.prop.expect is None:
            return True
        return self.value == ("TRUE" if self.prop.expect else "FALSE")


# --------------------------------------------------------------------------
# property file parser

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*)
  | (?P<num>-?\d+)
  | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|!=|[=<>()@\[\],.:])
""", re.VERBOSE)


def _tokenize(text):
    tokens = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise PropParseError(f"bad character {text[pos]!r}", line, col)
        kind = m.lastgroup
        value = m.group()
        if kind not in ("ws", "comment"):
            tokens.append((kind, value, line, col))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            col = len(value) - value.rfind("\n")
        else:
            col += len(value)
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self):
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else (None, "", 1, 1)
            raise PropParseError("unexpected end of file", last[2], last[3])
        self.i += 1
        return tok

    def error(self, message):
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else (None, "", 1, 1)
            raise PropParseError(message, last[2], last[3])
        raise PropParseError(f"{message}, got {tok[1]!r}", tok[2], tok[3])

    def expect_tok(self, value):
        tok = self.next()
        if tok[1] != value:
            raise PropParseError(f"expected {value!r}, got {tok[1]!r}",
                                 tok[2], tok[3])
        return tok

    def word(self, what="a name"):
        tok = self.next()
        if tok[0] != "word":
            raise PropParseError(f"expected {what}, got {tok[1]!r}",
                                 tok[2], tok[3])
        return tok[1]

    def at(self, value):
        tok = self.peek()
        return tok is not None and tok[1] == value

    # grammar -------------------------------------------------------------

    def properties(self):
        out = []
        while self.peek() is not None:
            out.append(self.property_())
        return out

    def property_(self):
        self.expect_tok("property")
        name = self.word("a property name")
        self.expect_tok("is")
        if self.at("absent") or self.at("present"):
            kind = self.next()[1]
            prop = Property(name, kind, p=self.pred())
        elif self.at("deadlockfree"):
            self.next()
            prop = Property(name, DEADLOCKFREE)
        elif self.at("always"):
            self.next()
            p = self.pred()
            self.expect_tok("implies")
            self.expect_tok("eventually")
            prop = Property(name, IMPLIES_EVENTUALLY, p=p, q=self.pred())
        else:
            p = self.pred()
            self.expect_tok("leadsto")
            q = self.pred()
            self.expect_tok("within")
            tok = self.expect_tok("[")
            lo = self.int_()
            self.expect_tok(",")
            hi = self.int_()
            self.expect_tok("]")
            if not 0 <= lo <= hi:
                raise PropParseError(
                    f"bad tick bound [{lo},{hi}]", tok[2], tok[3])
            prop = Property(name, LEADSTO, p=p, q=q, lo=lo, hi=hi)
        if self.at("expect"):
            self.next()
            self.expect_tok(":")
            tok = self.next()
            if tok[1].upper() not in ("TRUE", "FALSE"):
                raise PropParseError(
                    f"expected TRUE or FALSE, got {tok[1]!r}", tok[2], tok[3])
            prop.expect = tok[1].upper() == "TRUE"
        return prop

    def int_(self):
        tok = self.next()
        if tok[0] != "num":
            raise PropParseError(f"expected an integer, got {tok[1]!r}",
                                 tok[2], tok[3])
        return int(tok[1])

    def pred(self):
        items = [self.and_pred()]
        while self.at("or"):
            self.next()
            items.append(self.and_pred())
        return items[0] if len(items) == 1 else Or(tuple(items))

    def and_pred(self):
        items = [self.not_pred()]
        while self.at("and"):
            self.next()
            items.append(self.not_pred())
        return items[0] if len(items) == 1 else And(tuple(items))

    def not_pred(self):
        if self.at("not"):
            self.next()
            return NotP(self.not_pred())
        if self.at("("):
            self.next()
            inner = self.pred()
            self.expect_tok(")")
            return inner
        return self.atom()

    def atom(self):
        head = self.word("an atom (node/sv/rstatus/local/terminal)")
        if head == "node":
            self.expect_tok("(")
            name = self.word("a node name")
            self.expect_tok(")")
            self.expect_tok("@")
            return NodeAt(name, self.word("a location name"))
        if head == "sv":
            self.expect_tok("(")
            name = self.word("an sv name")
            self.expect_tok(")")
            op = self.cmp_op()
            tok = self.next()
            if tok[0] == "num":
                if op == "=":
                    return SvCmp(name, "=", int(tok[1]))
                return SvCmp(name, op, int(tok[1]))
            if tok[0] != "word" or op != "=":
                raise PropParseError(
                    f"enumerated sv comparisons must use '=', got {tok[1]!r}",
                    tok[2], tok[3])
            return SvEq(name, tok[1])
        if head == "rstatus":
            self.expect_tok("(")
            name = self.word("a node name")
            self.expect_tok(")")
            self.expect_tok("=")
            return RStatusEq(name, self.word("a status"))
        if head == "local":
            self.expect_tok("(")
            name = self.word("a node name")
            self.expect_tok(".")
            var = self.word("a local variable name")
            self.expect_tok(")")
            op = self.cmp_op()
            return LocalCmp(name, var, op, self.int_())
        if head == "terminal":
            self.expect_tok("(")
            status = self.word("a status")
            self.expect_tok(")")
            return RootTerminal(status)
        self.i -= 1
        self.error("expected an atom (node/sv/rstatus/local/terminal)")

    def cmp_op(self):
        tok = self.next()
        if tok[1] not in _CMP:
            raise PropParseError(f"expected a comparison, got {tok[1]!r}",
                                 tok[2], tok[3])
        return tok[1]


def parse_properties(text):
    return _Parser(text).properties()


# --------------------------------------------------------------------------
# checking

def _trace_to(graph: StateGraph, target_id):
    target = graph.states[target_id]
    return find_path(graph, lambda cells: cells == target)


def check(graph: StateGraph, prop: Property) -> Verdict:
    t0 = time.perf_counter()
    model = graph.model
    try:
        if prop.kind in (ABSENT, PRESENT):
            fn = compile_predicate(prop.p, model)
            hit = None
            for i, s in enumerate(graph.states):
                if fn(s):
                    hit = i
                    break
            if prop.kind == ABSENT:
                if hit is not None:
                    v = Verdict(prop, "FALSE", witness=_trace_to(graph, hit))
                elif not graph.complete:
                    v = Verdict(prop, "UNKNOWN", reason="partial graph")
                else:
                    v = Verdict(prop, "TRUE")
            else:
                if hit is not None:
                    v = Verdict(prop, "TRUE", witness=_trace_to(graph, hit))
                elif not graph.complete:
                    v = Verdict(prop, "UNKNOWN", reason="partial graph")
                else:
                    v = Verdict(prop, "FALSE")
        elif prop.kind == DEADLOCKFREE:
            v = _check_deadlockfree(graph, prop)
        elif prop.kind == LEADSTO:
            v = _check_leadsto(graph, prop)
        elif prop.kind == IMPLIES_EVENTUALLY:
            v = _check_implies_eventually(graph, prop)
        else:
            raise PropertyError(f"unknown property kind {prop.kind!r}")
    finally:
        pass
    v.seconds = time.perf_counter() - t0
    return v


def _check_deadlockfree(graph, prop):
    model = graph.model
    for i, s in enumerate(graph.states):
        if graph.is_sink(i) and not model.is_terminal(s):
            return Verdict(prop, "FALSE", witness=_trace_to(graph, i),
                           reason="non-terminal sink")
    if not graph.complete:
        return Verdict(prop, "UNKNOWN", reason="partial graph")
    return Verdict(prop, "TRUE")


def _check_leadsto(graph, prop):
    """From every p-state, every path must visit a q-state t tick boundaries
    later with lo <= t <= hi. A path that runs past hi boundaries, or ends,
    without such a visit is a counterexample."""
    model = graph.model
    p = compile_predicate(prop.p, model)
    q = compile_predicate(prop.q, model)
    lo, hi = prop.lo, prop.hi
    qhit = [q(s) for s in graph.states]
    p_states = [i for i, s in enumerate(graph.states) if p(s)]
    if not p_states and not graph.complete:
        return Verdict(prop, "UNKNOWN", reason="partial graph")

    for start in p_states:
        # Forward search over (state, boundary count); only carries paths
        # that have not yet satisfied the response.
        if qhit[start] and lo == 0:
            continue
        seen = {(start, 0)}
        frontier = [(start, 0)]
        parent = {(start, 0): None}
        bad = None
        while frontier and bad is None:
            nxt = []
            for si, t in frontier:
                edges = graph.edges[si]
                if not edges:
                    if not graph.complete:
                        return Verdict(prop, "UNKNOWN",
                                       reason="partial graph")
                    bad = (si, t, "path ends without reaching the target")
                    break
                for label, di in edges:
                    t2 = t + (1 if model.is_boundary_label(label) else 0)
                    if qhit[di] and lo <= t2 <= hi:
                        continue  # this path satisfied the response
                    if t2 > hi:
                        bad = (di, t2, "tick bound exceeded")
                        parent[(di, t2)] = ((si, t), label)
                        break
                    if (di, t2) not in seen:
                        seen.add((di, t2))
                        parent[(di, t2)] = ((si, t), label)
                        nxt.append((di, t2))
                if bad is not None:
                    break
            frontier = nxt
        if bad is not None:
            tail_states, tail_steps = _unwind(graph, parent, (bad[0], bad[1]))
            prefix = _trace_to(graph, start)
            states = prefix.states + tail_states[1:]
            steps = prefix.steps + tail_steps
            return Verdict(prop, "FALSE", witness=Trace(states, steps),
                           reason=bad[2])
    if not graph.complete:
        return Verdict(prop, "UNKNOWN", reason="partial graph")
    return Verdict(prop, "TRUE")


def _unwind(graph, parent, key):
    """Rebuild the searched path ending at `key` from the parent links.
    Returns (state id list, step list) in Trace format."""
    rev = []
    while parent.get(key) is not None:
        (prev, label) = parent[key]
        rev.append((key[0], label))
        key = prev
    rev.reverse()
    states = [key[0]] + [sid for sid, _ in rev]
    steps = [(label, sid) for sid, label in rev]
    return states, steps


def _check_implies_eventually(graph, prop):
    """Every infinite path from a p-state must visit a q-state. False iff a
    cycle of q-avoiding states is reachable from a p-state through q-avoiding
    states; the witness is a lasso."""
    model = graph.model
    p = compile_predicate(prop.p, model)
    q = compile_predicate(prop.q, model)
    n = len(graph.states)
    qhit = [q(s) for s in graph.states]

    # Restrict to q-avoiding states reachable from a q-avoiding p-state.
    roots = [i for i in range(n) if p(graph.states[i]) and not qhit[i]]
    reach = set()
    stack = list(roots)
    while stack:
        i = stack.pop()
        if i in reach:
            continue
        reach.add(i)
        for label, j in graph.edges[i]:
            if not qhit[j] and j not in reach:
                stack.append(j)

    cycle = _find_cycle(graph, reach, qhit)
    if cycle is not None:
        prefix = _trace_to(graph, cycle[0])
        states = list(prefix.states)
        steps = list(prefix.steps)
        for label, j in cycle[1]:
            steps.append((label, j))
            states.append(j)
        return Verdict(prop, "FALSE", witness=Trace(states, steps),
                       reason="cycle avoiding the target")
    if not graph.complete:
        return Verdict(prop, "UNKNOWN", reason="partial graph")
    return Verdict(prop, "TRUE")


def _find_cycle(graph, allowed, qhit):
    """Find a cycle within `allowed` (all q-avoiding). Returns
    (entry_state, [(label, state), ...] closing the loop) or None."""
    color = {}
    for root in allowed:
        if root in color:
            continue
        stack = [(root, iter(graph.edges[root]))]
        color[root] = 1
        onpath = [root]
        while stack:
            i, it = stack[-1]
            advanced = False
            for label, j in it:
                if j not in allowed or qhit[j]:
                    continue
                if color.get(j) == 1:
                    # found a back edge; walk the explicit path for the lasso
                    k = onpath.index(j)
                    loop_nodes = onpath[k:] + [j]
                    loop = []
                    for a, b in zip(loop_nodes, loop_nodes[1:]):
                        for label2, dj in graph.edges[a]:
                            if dj == b:
                                loop.append((label2, dj))
                                break
                    return j, loop
                if j not in color:
                    color[j] = 1
                    onpath.append(j)
                    stack.append((j, iter(graph.edges[j])))
                    advanced = True
                    break
            if not advanced:
                color[i] = 2
                stack.pop()
                onpath.pop()
        # loop continues with next root
    return None


# --------------------------------------------------------------------------
# default per-node suite

RUNNING_CAPABLE = {"Action"}


def default_properties(model: ComposedModel):
    """One liveness batch per node: can it complete, succeed, fail, be
    halted (and, for long-running leaves, report Running), plus global
    deadlock freedom."""
    out = []
    for name in model.node_order:
        info = model.node(name)
        out.append(Property(f"{name}_can_complete", PRESENT,
                            p=NodeAt(name, "done")))
        out.append(Property(f"{name}_can_succeed", PRESENT,
                            p=RStatusEq(name, "success")))
        out.append(Property(f"{name}_can_fail", PRESENT,
                            p=RStatusEq(name, "failure")))
        out.append(Property(f"{name}_can_be_halted", PRESENT,
                            p=NodeAt(name, "halted")))
        if info.kind in RUNNING_CAPABLE:
            out.append(Property(f"{name}_can_run_long", PRESENT,
                                p=RStatusEq(name, "running")))
    out.append(Property("deadlockfree", DEADLOCKFREE))
    return out


def check_all(graph: StateGraph, properties):
    return [check(graph, prop) for prop in properties]
