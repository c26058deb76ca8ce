"""Reference tree interpreter, used as a differential oracle.

Walks the validated AST directly, with per-node memory mirroring the node
semantics: no compiled automata, no shared code with the compiler. Ticks
are driven one at a time; a Parallel with :wait suspends the whole tick
via generators until its stragglers finish.

Observable events are plain tuples:
  ("ticked", node) ("returned", node, status) ("halting", node)
  ("halted", node) ("sv_changed", sv, old, new) ("root_terminal", node, status)
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .runtime import OutcomeScript, ScriptExhausted, sv_choices
from .syntax import (
    ALL_PAIRS,
    Add,
    ArgRef,
    Assign,
    Eq,
    FALLBACK_FAMILY,
    Literal,
    Mul,
    Not,
    NodeKind,
    SEQUENCE_FAMILY,
    StatusRef,
    SvRef,
)

SUCCESS, FAILURE, RUNNING, NO_RET = "success", "failure", "running", "no_ret"

_STATUS_CODE = {NO_RET: 0, SUCCESS: 1, FAILURE: 2, RUNNING: 3}


class InterpError(Exception):
    pass


class BudgetExceeded(Exception):
    pass


# --------------------------------------------------------------------------
# outcome deciders

class ScriptDecider:
    """Same contract as the runtime's scripted provider: script entries by
    invocation ordinal, seeded fallback, latency counted in ticks."""

    def __init__(self, vspec, script=None, seed=None):
        self.vspec = vspec
        self.script = script or OutcomeScript()
        self.rng = random.Random(seed) if seed is not None else None
        self.ordinals = {}
        self.pending = {}  # (name, ordinal) -> [outcome, remaining]
        self.tick = 0

    def _next_ordinal(self, key):
        k = self.ordinals.get(key, 0) + 1
        self.ordinals[key] = k
        return k

    def on_tick(self, tick):
        self.tick = tick
        for entry in self.pending.values():
            if entry[1] > 0:
                entry[1] -= 1

    def action(self, name, ordinal, started, sf):
        if started:
            entry = self.script.actions.get((name, ordinal))
            if entry is None:
                if self.rng is None:
                    raise ScriptExhausted(
                        f"no script entry for node {name} ordinal {ordinal}")
                entry = (self.rng.choice([SUCCESS, FAILURE]),
                         0 if sf else self.rng.choice([0, 1, 2]))
            self.pending[(name, ordinal)] = list(entry)
        entry = self.pending[(name, ordinal)]
        if entry[1] > 0:
            if sf:
                raise InterpError(f"action {name} cannot run long (:SF)")
            return RUNNING
        del self.pending[(name, ordinal)]
        return entry[0]

    def drop(self, name, ordinal):
        self.pending.pop((name, ordinal), None)

    def condition(self, name, ordinal):
        outcome = self.script.conditions.get((name, ordinal))
        if outcome is None:
            if self.rng is None:
                raise ScriptExhausted(
                    f"no script entry for condition {name} ordinal {ordinal}")
            outcome = self.rng.choice([SUCCESS, FAILURE])
        return outcome

    def setsv(self, name, ordinal, current, decl):
        value = self.script.setsv.get((name, ordinal))
        if value is None:
            if self.rng is None:
                raise ScriptExhausted(
                    f"no script entry for setsv {name} ordinal {ordinal}")
            value = self.rng.choice(sv_choices(decl, current))
        return value if decl.is_enumerated else int(value)

    def env(self, sv, tick, current, decl):
        value = self.script.env.get((sv, tick))
        if value is None:
            if self.rng is None:
                return None
            value = self.rng.choice(sv_choices(decl, current))
        return value if decl.is_enumerated else int(value)


class EnumDecider:
    """Replays a prefix of choice indices, then picks the first option and
    records the branching so a driver can enumerate all alternatives. Builds
    the equivalent outcome script on the fly."""

    def __init__(self, path):
        self.path = list(path)
        self.depth = 0
        self.options = []  # option count at each choice point
        self.script = OutcomeScript()
        self.running_counts = {}
        self.tick = 0

    def on_tick(self, tick):
        self.tick = tick

    def _choose(self, options):
        d = self.depth
        self.depth += 1
        self.options.append(len(options))
        i = self.path[d] if d < len(self.path) else 0
        return options[i]

    def action(self, name, ordinal, started, sf):
        options = [SUCCESS, FAILURE] if sf else [SUCCESS, FAILURE, RUNNING]
        outcome = self._choose(options)
        key = (name, ordinal)
        if outcome == RUNNING:
            self.running_counts[key] = self.running_counts.get(key, 0) + 1
        else:
            latency = self.running_counts.pop(key, 0)
            self.script.actions[key] = (outcome, latency)
        return outcome

    def finish(self, max_ticks):
        # actions still pending at the end of the run never complete
        for key, count in self.running_counts.items():
            self.script.actions[key] = (SUCCESS, count + max_ticks + 1)
        return self.script

    def condition(self, name, ordinal):
        outcome = self._choose([SUCCESS, FAILURE])
        self.script.conditions[(name, ordinal)] = outcome
        return outcome

    def setsv(self, name, ordinal, current, decl):
        seen, options = set(), []
        for v in sv_choices(decl, current):
            if v not in seen:
                seen.add(v)
                options.append(v)
        value = self._choose(options)
        self.script.setsv[(name, ordinal)] = value
        return value

    def env(self, sv, tick, current, decl):
        seen, options = set(), []
        for v in sv_choices(decl, current):
            if v not in seen:
                seen.add(v)
                options.append(v)
        value = self._choose(options)
        if value != current:
            self.script.env[(sv, tick)] = value
        return value


# --------------------------------------------------------------------------
# interpreter state

@dataclass
class InterpState:
    svs: dict = field(default_factory=dict)
    last: dict = field(default_factory=dict)   # node -> last reported status
    mem: dict = field(default_factory=dict)    # node -> counters
    pending: dict = field(default_factory=dict)  # action node -> ordinal
    ordinals: dict = field(default_factory=dict)
    tick: int = 0
    susp: object = None  # suspended tick generator (waiting Parallel)


class Interpreter:
    def __init__(self, vspec, decider, tree_name=None):
        self.vspec = vspec
        self.decider = decider
        self.tree = vspec.tree(tree_name)
        self.state = InterpState()
        for decl in vspec.svs:
            self.state.svs[decl.name] = (decl.init if decl.is_enumerated
                                         else int(decl.init))
        for node in self.tree.walk():
            self.state.last[node.canonical_name] = NO_RET
        self.events = []
        self.sv_decls = {decl.name: decl for decl in vspec.svs}

    # -- helpers -------------------------------------------------------------

    def emit(self, *event):
        self.events.append(event)

    def next_ordinal(self, key):
        k = self.state.ordinals.get(key, 0) + 1
        self.state.ordinals[key] = k
        return k

    def mem(self, node, defaults):
        m = self.state.mem.get(node.canonical_name)
        if m is None:
            m = dict(defaults)
            self.state.mem[node.canonical_name] = m
        return m

    def set_last(self, node, status):
        self.state.last[node.canonical_name] = status

    def last(self, node):
        return self.state.last[node.canonical_name]

    # -- public drive ---------------------------------------------------------

    def interpret_tick(self):
        """Run one tick. Returns (events, root status or None); status is
        None while the tree is internally waiting or returned running."""
        st = self.state
        st.tick += 1
        self.events = []
        self.decider.on_tick(st.tick)
        for decl in self.vspec.svs:
            if decl.name not in self.vspec.environment_svs:
                continue
            current = st.svs[decl.name]
            value = self.decider.env(decl.name, st.tick, current, decl)
            if value is None or value == current:
                continue
            if value not in sv_choices(decl, current):
                raise InterpError(f"env {decl.name}: {value!r} is not an "
                                  f"allowed transition from {current!r}")
            st.svs[decl.name] = value
            self.emit("sv_changed", decl.name, current, value)
        if st.susp is None:
            self.emit("ticked", self.tree.canonical_name)
            gen = self.tick_node(self.tree)
        else:
            gen = st.susp
            st.susp = None
        try:
            next(gen)
        except StopIteration as stop:
            status = stop.value
            if status in (SUCCESS, FAILURE):
                self.emit("root_terminal", self.tree.canonical_name, status)
                return self.events, status
            return self.events, None
        st.susp = gen
        return self.events, None

    def run(self, max_ticks):
        """Drive to root termination or the tick bound; returns (all events,
        final status or None)."""
        out = []
        for _ in range(max_ticks):
            events, status = self.interpret_tick()
            out.extend(events)
            if status is not None:
                return out, status
        return out, None

    # -- tick dispatch --------------------------------------------------------

    def tick_node(self, node):
        self.set_last(node, NO_RET)
        kind = node.kind
        if kind is NodeKind.BEHAVIOR_TREE:
            status = yield from self.tick_passthrough(node)
        elif kind in SEQUENCE_FAMILY:
            status = yield from self.tick_seq(node)
        elif kind in FALLBACK_FAMILY:
            status = yield from self.tick_fb(node)
        elif kind in (NodeKind.PARALLEL, NodeKind.PARALLEL_ALL):
            status = yield from self.tick_parallel(node)
        elif kind in (NodeKind.INVERTER, NodeKind.FORCE_FAILURE,
                      NodeKind.FORCE_SUCCESS,
                      NodeKind.KEEP_RUNNING_UNTIL_FAILURE):
            status = yield from self.tick_decorator(node)
        elif kind is NodeKind.REPEAT:
            status = yield from self.tick_repeat(node)
        elif kind is NodeKind.RETRY_UNTIL_SUCCESSFUL:
            status = yield from self.tick_retry(node)
        elif kind is NodeKind.RATE_CONTROLLER:
            status = yield from self.tick_rate(node)
        elif kind is NodeKind.RECOVERY:
            status = yield from self.tick_recovery(node)
        elif kind is NodeKind.ROUND_ROBIN:
            status = yield from self.tick_round_robin(node)
        elif kind is NodeKind.PIPELINE_SEQUENCE:
            status = yield from self.tick_pipeline(node)
        elif kind is NodeKind.CONDITION:
            status = self.tick_condition(node)
        elif kind is NodeKind.ACTION:
            status = self.tick_action(node)
        elif kind is NodeKind.SET_SV:
            status = self.tick_setsv(node)
        elif kind is NodeKind.EVAL:
            status = self.tick_eval(node)
        else:
            raise InterpError(f"no interpretation for {kind.value}")
        self.emit("returned", node.canonical_name, status)
        self.set_last(node, status)
        return status

    def call(self, node):
        self.emit("ticked", node.canonical_name)
        status = yield from self.tick_node(node)
        return status

    # -- halting --------------------------------------------------------------

    def halt(self, node):
        """Process a halt request for `node` (its own Halting was already
        emitted by the requester)."""
        kids = [k for k in node.children
                if self.last(k) == RUNNING]
        for k in kids:
            self.emit("halting", k.canonical_name)
        for k in kids:
            self.halt(k)
        if node.kind is NodeKind.ACTION:
            ordinal = self.state.pending.pop(node.canonical_name, None)
            if ordinal is not None and hasattr(self.decider, "drop"):
                self.decider.drop(node.canonical_name, ordinal)
        self.reset_mem(node)
        self.emit("halted", node.canonical_name)
        self.emit("returned", node.canonical_name, FAILURE)
        self.set_last(node, FAILURE)

    def halt_stale(self, node, kids=None):
        """Halt still-running children before the node reports (:halt)."""
        stale = [k for k in (kids if kids is not None else node.children)
                 if self.last(k) == RUNNING]
        for k in stale:
            self.emit("halting", k.canonical_name)
        for k in stale:
            self.halt(k)

    def finish(self, node, status):
        if node.attrs.get("halt"):
            self.halt_stale(node)
        return status

    def reset_mem(self, node):
        self.state.mem.pop(node.canonical_name, None)

    # -- composites -----------------------------------------------------------

    def tick_passthrough(self, node):
        status = yield from self.call(node.children[0])
        return status

    def tick_seq(self, node):
        kids = node.children
        n = len(kids)
        m = self.mem(node, {"next": 1})
        i = m["next"]
        while True:
            status = yield from self.call(kids[i - 1])
            if status == SUCCESS:
                if i == n:
                    m["next"] = 1
                    return self.finish(node, SUCCESS)
                i += 1
                continue
            if status == FAILURE:
                m["next"] = i if node.kind is NodeKind.SEQUENCE_WITH_MEMORY else 1
                return self.finish(node, FAILURE)
            m["next"] = 1 if node.kind is NodeKind.REACTIVE_SEQUENCE else i
            return RUNNING

    def tick_fb(self, node):
        kids = node.children
        n = len(kids)
        m = self.mem(node, {"next": 1})
        i = m["next"]
        while True:
            status = yield from self.call(kids[i - 1])
            if status == FAILURE:
                if i == n:
                    m["next"] = 1
                    return self.finish(node, FAILURE)
                i += 1
                continue
            if status == SUCCESS:
                m["next"] = 1
                return self.finish(node, SUCCESS)
            m["next"] = 1 if node.kind is NodeKind.REACTIVE_FALLBACK else i
            return RUNNING

    def tick_parallel(self, node):
        kids = node.children
        n = len(kids)
        m_thresh = n if node.kind is NodeKind.PARALLEL_ALL \
            else node.attrs["success"]
        mem = self.mem(node, {"runset": (), "succ": 0, "fail": 0})
        ticked = list(mem["runset"]) or list(range(n))
        for i in ticked:
            self.emit("ticked", kids[i].canonical_name)
        runset = []
        for i in ticked:
            status = yield from self.tick_node(kids[i])
            if status == SUCCESS:
                mem["succ"] += 1
            elif status == FAILURE:
                mem["fail"] += 1
            else:
                runset.append(i)
        mem["runset"] = tuple(runset)
        if mem["succ"] >= m_thresh:
            decided = SUCCESS
        elif mem["fail"] > n - m_thresh:
            decided = FAILURE
        else:
            return RUNNING
        if node.attrs.get("halt"):
            self.halt_stale(node, [kids[i] for i in runset])
        elif node.attrs.get("wait"):
            while mem["runset"]:
                yield  # consume a tick boundary, then re-tick stragglers
                again = list(mem["runset"])
                for i in again:
                    self.emit("ticked", kids[i].canonical_name)
                runset = []
                for i in again:
                    status = yield from self.tick_node(kids[i])
                    if status == RUNNING:
                        runset.append(i)
                mem["runset"] = tuple(runset)
        self.reset_mem(node)
        return decided

    def tick_decorator(self, node):
        table = {
            NodeKind.INVERTER: (FAILURE, SUCCESS, RUNNING),
            NodeKind.FORCE_FAILURE: (FAILURE, FAILURE, RUNNING),
            NodeKind.FORCE_SUCCESS: (SUCCESS, SUCCESS, RUNNING),
            NodeKind.KEEP_RUNNING_UNTIL_FAILURE: (RUNNING, FAILURE, RUNNING),
        }
        on_s, on_f, on_r = table[node.kind]
        status = yield from self.call(node.children[0])
        return {SUCCESS: on_s, FAILURE: on_f, RUNNING: on_r}[status]

    def tick_repeat(self, node):
        k = node.attrs["repeat"]
        m = self.mem(node, {"count": 0})
        while True:
            status = yield from self.call(node.children[0])
            if status == SUCCESS:
                if m["count"] >= k - 1:
                    m["count"] = 0
                    return SUCCESS
                m["count"] += 1
                continue
            if status == FAILURE:
                m["count"] = 0
            return status

    def tick_retry(self, node):
        k = node.attrs.get("num_attempts", node.attrs.get("num_retries"))
        m = self.mem(node, {"attempt": 0})
        while True:
            status = yield from self.call(node.children[0])
            if status == FAILURE:
                if m["attempt"] >= k - 1:
                    m["attempt"] = 0
                    return FAILURE
                m["attempt"] += 1
                continue
            if status == SUCCESS:
                m["attempt"] = 0
            return status

    def tick_rate(self, node):
        hz = node.attrs.get("hz")
        if hz is None:
            hz = dict(node.attrs.get("args", []))["hz"]
        period = max(1, math.ceil(1 / float(hz)))
        m = self.mem(node, {"elapsed": period})
        if m["elapsed"] < period:
            m["elapsed"] += 1
            return RUNNING
        m["elapsed"] = 1
        status = yield from self.call(node.children[0])
        return status

    def tick_recovery(self, node):
        first, recov = node.children
        bound = node.attrs["num_retries"]
        m = self.mem(node, {"retry": 0, "phase": 1})
        while True:
            if m["phase"] == 2:
                status = yield from self.call(recov)
                if status == RUNNING:
                    return RUNNING
                if status == FAILURE:
                    self.reset_mem(node)
                    return FAILURE
                m["retry"] += 1
                m["phase"] = 1
                continue
            status = yield from self.call(first)
            if status == SUCCESS:
                self.reset_mem(node)
                return SUCCESS
            if status == RUNNING:
                return RUNNING
            if m["retry"] >= bound:
                self.reset_mem(node)
                return FAILURE
            m["phase"] = 2

    def tick_round_robin(self, node):
        kids = node.children
        n = len(kids)
        m = self.mem(node, {"index": 1, "failed": 0})
        while True:
            i = m["index"]
            status = yield from self.call(kids[i - 1])
            if status == SUCCESS:
                m["index"] = i % n + 1
                m["failed"] = 0
                return SUCCESS
            if status == RUNNING:
                return RUNNING
            if m["failed"] >= n - 1:
                self.reset_mem(node)
                return FAILURE
            m["failed"] += 1
            m["index"] = i % n + 1

    def tick_pipeline(self, node):
        kids = node.children
        n = len(kids)
        m = self.mem(node, {"frontier": 1})
        i = 1
        while True:
            status = yield from self.call(kids[i - 1])
            if status == FAILURE:
                m["frontier"] = 1
                return self.finish(node, FAILURE)
            if i < n:
                if m["frontier"] > i:
                    i += 1
                    continue
                if status == SUCCESS:
                    m["frontier"] = i + 1
                return RUNNING
            if status == SUCCESS:
                m["frontier"] = 1
                return self.finish(node, SUCCESS)
            return RUNNING

    # -- leaves ---------------------------------------------------------------

    def tick_condition(self, node):
        name = node.canonical_name
        return self.decider.condition(name, self.next_ordinal(name))

    def tick_action(self, node):
        name = node.canonical_name
        sf = bool(node.attrs.get("SF"))
        ordinal = self.state.pending.get(name)
        started = ordinal is None
        if started:
            ordinal = self.next_ordinal(name)
        outcome = self.decider.action(name, ordinal, started, sf)
        if outcome == RUNNING:
            self.state.pending[name] = ordinal
        else:
            self.state.pending.pop(name, None)
        return outcome

    def tick_setsv(self, node):
        sv_name = node.attrs.get("sv", node.attrs.get("SV"))
        decl = self.sv_decls[sv_name]
        current = self.state.svs[sv_name]
        ordinal = self.next_ordinal(f"setsv:{sv_name}")
        value = self.decider.setsv(sv_name, ordinal, current, decl)
        if value not in sv_choices(decl, current):
            raise InterpError(f"setsv {sv_name}: {value!r} is not an allowed "
                              f"transition from {current!r}")
        if value != current:
            self.state.svs[sv_name] = value
            self.emit("sv_changed", sv_name, current, value)
        return SUCCESS

    def tick_eval(self, node):
        expr = node.expr
        if isinstance(expr, Assign):
            decl = self.sv_decls[expr.sv_name]
            current = self.state.svs[expr.sv_name]
            value = self.eval_value(expr.value, decl)
            if decl.is_enumerated:
                legal = (value == current
                         or decl.transitions == ALL_PAIRS
                         or (current, value) in decl.transitions)
            else:
                legal = decl.min <= value <= decl.max
            if not legal:
                return FAILURE
            if value != current:
                self.state.svs[expr.sv_name] = value
                self.emit("sv_changed", expr.sv_name, current, value)
            return SUCCESS
        return SUCCESS if self.eval_cond(expr) else FAILURE

    # -- expression evaluation ------------------------------------------------

    def eval_cond(self, expr):
        if isinstance(expr, Not):
            return not self.eval_cond(expr.operand)
        if isinstance(expr, Eq):
            left, lt = self._typed(expr.left)
            right, rt = self._typed(expr.right)
            left = self._coerce(left, lt, rt)
            right = self._coerce(right, rt, lt)
            return left == right
        raise InterpError(f"expected a condition, got {expr!r}")

    def eval_value(self, expr, decl):
        value, typ = self._typed(expr)
        if decl.is_enumerated and typ == "lit":
            return value
        return value

    def _typed(self, expr):
        if isinstance(expr, Literal):
            if isinstance(expr.value, int):
                return expr.value, "int"
            return expr.value, "lit"
        if isinstance(expr, (SvRef, ArgRef)):
            return self.state.svs[expr.name], "sv"
        if isinstance(expr, StatusRef):
            return _STATUS_CODE[self.state.last[expr.node_name]], "status"
        if isinstance(expr, (Add, Mul)):
            a, _ = self._typed(expr.left)
            b, _ = self._typed(expr.right)
            return (a + b if isinstance(expr, Add) else a * b), "int"
        raise InterpError(f"cannot evaluate {expr!r}")

    def _coerce(self, value, typ, other_typ):
        if typ == "lit" and other_typ == "status":
            return _STATUS_CODE[str(value).lower()]
        return value


# --------------------------------------------------------------------------
# public entry points

def interpret_run(vspec, script=None, seed=None, max_ticks=100, tree_name=None):
    it = Interpreter(vspec, ScriptDecider(vspec, script, seed), tree_name)
    return it.run(max_ticks)


def enumerate_behaviors(vspec, max_ticks, tree_name=None, max_sequences=200000):
    """All behaviors up to max_ticks: exhaustively explores every leaf
    outcome and environment choice. Returns a list of
    (script, events, final status or None)."""
    results = []
    stack = [[]]
    while stack:
        prefix = stack.pop()
        dec = EnumDecider(prefix)
        it = Interpreter(vspec, dec, tree_name)
        events, status = it.run(max_ticks)
        script = dec.finish(max_ticks)
        results.append((script, events, status))
        if len(results) > max_sequences:
            raise BudgetExceeded(f"more than {max_sequences} behaviors")
        full = [dec.path[d] if d < len(dec.path) else 0
                for d in range(dec.depth)]
        for d in range(len(prefix), dec.depth):
            for j in range(1, dec.options[d]):
                stack.append(full[:d] + [j])
    return results
