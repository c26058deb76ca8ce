"""Translate a validated tree into a network of discrete-timed automata.

One process per tree node, one per state variable, plus a root ticker.
Node processes communicate through per-node {caller, rstatus} record cells:
a parent ticks a child by writing the child's caller, the child reports by
writing its rstatus and relinquishes by clearing its caller.
"""

from __future__ import annotations

import math

from .model import (
    CALLER_NONE,
    ComposedModel,
    NodeInfo,
    ONE_TICK,
    Status,
    SvSlot,
    TickSemantics,
    Transition,
    URGENT,
)
from .syntax import (
    ALL_PAIRS,
    Add,
    ArgRef,
    Assign,
    Eq,
    FALLBACK_FAMILY,
    LEAF_KINDS,
    Literal,
    Mul,
    NodeKind,
    Not,
    SEQUENCE_FAMILY,
    StatusRef,
    SvRef,
)

TICKER_ID = 0  # caller value the ticker writes into the root node


class CompileError(Exception):
    pass


_STATUS_BY_NAME = {
    "success": Status.SUCCESS,
    "failure": Status.FAILURE,
    "running": Status.RUNNING,
}


def compile_model(vspec, tick_semantics=TickSemantics.ROOT_ONLY, tree_name=None):
    """Compile one tree of a validated document into a ComposedModel."""
    if isinstance(tick_semantics, str):
        tick_semantics = TickSemantics(tick_semantics)
    return _Compiler(vspec, tick_semantics, vspec.tree(tree_name)).build()


class _Compiler:
    def __init__(self, vspec, tick_semantics, tree):
        self.vspec = vspec
        self.ts = tick_semantics
        self.tree = tree
        self.model = ComposedModel(tick_semantics)
        self.init = []

    # -- cell bookkeeping ---------------------------------------------------

    def new_cell(self, value):
        cell = self.model.alloc_cell()
        self.init.append(value)
        assert len(self.init) == cell + 1
        return cell

    def new_process(self, name, kind):
        proc = self.model.add_process(name, kind)
        self.init.append(0)  # every process starts in its first location
        return proc

    def build(self):
        m = self.model
        m.vspec = self.vspec
        m.tree = self.tree

        # SV value cells first so expression closures can capture them.
        for decl in self.vspec.svs:
            values = list(decl.states) if decl.is_enumerated else None
            init = values.index(decl.init) if values else int(decl.init)
            slot = SvSlot(name=decl.name, cell=self.new_cell(init),
                          values=values, decl=decl,
                          environment=decl.name in self.vspec.environment_svs)
            m.svs[decl.name] = slot

        # First pass: a process and record cells for every node, in pre-order,
        # so parent bodies can reference child records.
        nodes = list(self.tree.walk())
        for node in nodes:
            proc = self.new_process(node.canonical_name, node.kind.value)
            info = NodeInfo(
                name=node.canonical_name, process=proc.index,
                caller_cell=self.new_cell(CALLER_NONE),
                rstatus_cell=self.new_cell(int(Status.NO_RET)),
                kind=node.kind.value, leaf=node.kind in LEAF_KINDS, node=node)
            m.nodes[node.canonical_name] = info
            m.node_order.append(node.canonical_name)

        for node in nodes:
            _NodeBuilder(self, node).build()

        for decl in self.vspec.svs:
            self._build_sv_process(m.svs[decl.name])

        self._build_ticker(m.nodes[self.tree.canonical_name])

        m.finish(self.init)
        return m

    # -- state-variable processes -------------------------------------------

    def _build_sv_process(self, slot: SvSlot):
        proc = self.new_process(f"sv:{slot.name}", "sv")
        proc.locations = ["at"]
        if not slot.environment:
            return  # program-driven: value changes only via SetSV/Eval effects
        cell = slot.cell
        self.model.add_transition(Transition(
            proc=proc.index, src=0, dst=0, timing=ONE_TICK,
            label=f"{slot.name}:stutter", events=("env", slot.name, None)))
        decl = slot.decl
        if decl.is_enumerated:
            if decl.transitions == ALL_PAIRS:
                pairs = [(a, b) for a in decl.states for b in decl.states if a != b]
            else:
                pairs = [(a, b) for a, b in decl.transitions if a != b]
            for a, b in pairs:
                ia, ib = slot.encode(a), slot.encode(b)
                self.model.add_transition(Transition(
                    proc=proc.index, src=0, dst=0, timing=ONE_TICK,
                    label=f"{slot.name}:{a}->{b}",
                    guard=_eq_cell(cell, ia), effect=_set_cell(cell, ib),
                    events=("env", slot.name, b)))
        else:
            for b in range(decl.min, decl.max + 1):
                self.model.add_transition(Transition(
                    proc=proc.index, src=0, dst=0, timing=ONE_TICK,
                    label=f"{slot.name}:={b}",
                    guard=_ne_cell(cell, b), effect=_set_cell(cell, b),
                    events=("env", slot.name, b)))

    # -- root ticker ---------------------------------------------------------

    def _build_ticker(self, root: NodeInfo):
        proc = self.new_process("ticker", "ticker")
        proc.locations = ["idle", "await", "succeeded", "failed"]
        cc, rc = root.caller_cell, root.rstatus_cell
        add = self.model.add_transition
        add(Transition(proc=proc.index, src=0, dst=1, timing=ONE_TICK,
                       label="tick_root", effect=_set_cell(cc, TICKER_ID)))
        add(Transition(proc=proc.index, src=1, dst=0, timing=URGENT,
                       label="root_running",
                       guard=_returned(cc, rc, Status.RUNNING)))
        add(Transition(proc=proc.index, src=1, dst=2, timing=URGENT,
                       label="root_success",
                       guard=_returned(cc, rc, Status.SUCCESS)))
        add(Transition(proc=proc.index, src=1, dst=3, timing=URGENT,
                       label="root_failure",
                       guard=_returned(cc, rc, Status.FAILURE)))
        self.model.ticker = proc
        self.model.ticker_terminal = {2: Status.SUCCESS, 3: Status.FAILURE}

    # -- expression compilation ----------------------------------------------

    def compile_condition(self, expr):
        """Compile a boolean expression to a closure over the state cells."""
        if isinstance(expr, Not):
            f = self.compile_condition(expr.operand)
            return lambda s: not f(s)
        if isinstance(expr, Eq):
            lf, lt = self._value(expr.left)
            rf, rt = self._value(expr.right)
            lf = self._encode_literal(lf, lt, rt)
            rf = self._encode_literal(rf, rt, lt)
            return lambda s: lf(s) == rf(s)
        raise CompileError(f"expected a condition, got {expr!r}")

    def compile_int(self, expr):
        f, t = self._value(expr)
        if t != "int":
            raise CompileError(f"expected an integer expression, got {expr!r}")
        return f

    def _value(self, expr):
        """Returns (closure, type); type is int | status | enum:<sv> | lit."""
        if isinstance(expr, Literal):
            v = expr.value
            if isinstance(v, int):
                return (lambda s, v=v: v), "int"
            return v, "lit"  # string literal: encoding depends on context
        if isinstance(expr, (SvRef, ArgRef)):
            slot = self.model.sv(expr.name)
            cell = slot.cell
            typ = f"enum:{slot.name}" if slot.values is not None else "int"
            return (lambda s, cell=cell: s[cell]), typ
        if isinstance(expr, StatusRef):
            info = self.model.node(expr.node_name)
            cell = info.rstatus_cell
            return (lambda s, cell=cell: s[cell]), "status"
        if isinstance(expr, (Add, Mul)):
            lf = self.compile_int(expr.left)
            rf = self.compile_int(expr.right)
            if isinstance(expr, Add):
                return (lambda s: lf(s) + rf(s)), "int"
            return (lambda s: lf(s) * rf(s)), "int"
        raise CompileError(f"cannot compile value {expr!r}")

    def _encode_literal(self, f, typ, other_typ):
        if typ != "lit":
            return f
        name = f
        if other_typ == "status":
            code = _STATUS_BY_NAME.get(str(name).lower())
            if code is None:
                raise CompileError(f"'{name}' is not a return status")
            return lambda s, code=int(code): code
        if isinstance(other_typ, str) and other_typ.startswith("enum:"):
            slot = self.model.sv(other_typ.split(":", 1)[1])
            idx = slot.encode(name)
            return lambda s, idx=idx: idx
        raise CompileError(f"cannot interpret literal '{name}' here")


# ---------------------------------------------------------------------------
# Guard/effect closure factories (bind cell indices now, not at call time)

def _set_cell(cell, value):
    def effect(s):
        s[cell] = value
    return effect


def _eq_cell(cell, value):
    return lambda s: s[cell] == value


def _ne_cell(cell, value):
    return lambda s: s[cell] != value


def _returned(caller_cell, rstatus_cell, status):
    status = int(status)
    return lambda s: s[caller_cell] == CALLER_NONE and s[rstatus_cell] == status


def _seq(*effects):
    effects = [e for e in effects if e is not None]
    if len(effects) == 1:
        return effects[0]

    def effect(s):
        for e in effects:
            e(s)
    return effect


def _bits(mask):
    i = 0
    while mask:
        if mask & 1:
            yield i
        mask >>= 1
        i += 1


# ---------------------------------------------------------------------------

class _NodeBuilder:
    """Builds one node's automaton. Location 0 is always start_."""

    def __init__(self, comp: _Compiler, node):
        self.comp = comp
        self.model = comp.model
        self.node = node
        self.info = comp.model.nodes[node.canonical_name]
        self.proc = comp.model.processes[self.info.process]
        self.v = node.index  # value written into a child's caller cell
        self.kids = [comp.model.nodes[c.canonical_name] for c in node.children]
        for name in ("start_", "tick_node", "success", "failure",
                     "running", "halted", "done", "halt"):
            self.loc(name)

    def loc(self, name):
        if name not in self.proc.locations:
            self.proc.locations.append(name)
        return self.proc.locations.index(name)

    def t(self, src, dst, label, guard=None, effect=None,
          timing=URGENT, tag=()):
        self.model.add_transition(Transition(
            proc=self.proc.index, src=self.loc(src), dst=self.loc(dst),
            timing=timing, label=label, guard=guard, effect=effect,
            events=tag))

    def local(self, name, init):
        cell = self.comp.new_cell(init)
        self.proc.locals[name] = cell
        return cell

    # -- shared plumbing ----------------------------------------------------

    def timed_tick(self):
        if self.comp.ts is TickSemantics.ALL_NODES:
            return True
        return self.comp.ts is TickSemantics.LEAVES and self.info.leaf

    def preamble(self):
        cc, rc = self.info.caller_cell, self.info.rstatus_cell
        halt_req = int(Status.HALT_ME)
        self.t("start_", "halt", "halt_req",
               guard=lambda s: s[cc] != CALLER_NONE and s[rc] == halt_req)
        self.t("start_", "tick_node", "tick",
               guard=lambda s: s[cc] != CALLER_NONE and s[rc] != halt_req,
               effect=_set_cell(rc, int(Status.NO_RET)))

    def postamble(self):
        cc, rc = self.info.caller_cell, self.info.rstatus_cell
        self.t("success", "done", "ret_success",
               effect=_set_cell(rc, int(Status.SUCCESS)))
        self.t("failure", "done", "ret_failure",
               effect=_set_cell(rc, int(Status.FAILURE)))
        self.t("running", "done", "ret_running",
               effect=_set_cell(rc, int(Status.RUNNING)))
        self.t("halted", "failure", "after_halt")
        self.t("done", "start_", "relinquish",
               effect=_set_cell(cc, CALLER_NONE))

    def tick_child(self, info):
        return _set_cell(info.caller_cell, self.v)

    def guard_any_running(self, kids=None):
        cells = [k.rstatus_cell for k in (kids or self.kids)]
        running = int(Status.RUNNING)
        return lambda s: any(s[c] == running for c in cells)

    def guard_none_running(self, kids=None):
        f = self.guard_any_running(kids)
        return lambda s: not f(s)

    def guard_all_relinquished(self, kids=None):
        cells = [k.caller_cell for k in (kids or self.kids)]
        return lambda s: all(s[c] == CALLER_NONE for c in cells)

    def halt_running_children(self, kids=None):
        pairs = [(k.caller_cell, k.rstatus_cell) for k in (kids or self.kids)]
        running, halt_req, v = int(Status.RUNNING), int(Status.HALT_ME), self.v

        def effect(s):
            for cc, rc in pairs:
                if s[rc] == running:
                    s[rc] = halt_req
                    s[cc] = v
        return effect

    def halt_path(self, reset=None):
        """From halt: propagate HaltMe to any still-running child, await
        their relinquish, then settle in halted (which reports failure)."""
        if not self.kids:
            self.t("halt", "halted", "leaf_halted", effect=reset)
            return
        self.t("halt", "halt_wait", "halt_children",
               guard=self.guard_any_running(),
               effect=self.halt_running_children())
        self.t("halt", "halted", "halted_idle",
               guard=self.guard_none_running(), effect=reset)
        self.t("halt_wait", "halted", "children_halted",
               guard=self.guard_all_relinquished(), effect=reset)

    def finish_target(self, status):
        """Terminal decision entry point. With :halt, stale running children
        are halted before the node reports; without it they are abandoned."""
        if not self.node.attrs.get("halt"):
            return status
        chk, wait = f"{status}_halt", f"{status}_halt_wait"
        if chk not in self.proc.locations:
            self.t(chk, wait, f"{status}_halt_stale",
                   guard=self.guard_any_running(),
                   effect=self.halt_running_children())
            self.t(chk, status, f"{status}_no_stale",
                   guard=self.guard_none_running())
            self.t(wait, status, f"{status}_stale_done",
                   guard=self.guard_all_relinquished())
        return chk

    def on_child(self, src, kid, status, dst, label, effect=None):
        self.t(src, dst, label,
               guard=_returned(kid.caller_cell, kid.rstatus_cell, status),
               effect=effect)

    # -- dispatch ------------------------------------------------------------

    def build(self):
        kind = self.node.kind
        self.preamble()
        if kind is NodeKind.BEHAVIOR_TREE:
            self.body_passthrough()
        elif kind in SEQUENCE_FAMILY:
            self.body_seq_family()
        elif kind in FALLBACK_FAMILY:
            self.body_fb_family()
        elif kind in (NodeKind.PARALLEL, NodeKind.PARALLEL_ALL):
            self.body_parallel()
        elif kind in (NodeKind.INVERTER, NodeKind.FORCE_FAILURE,
                      NodeKind.FORCE_SUCCESS, NodeKind.KEEP_RUNNING_UNTIL_FAILURE):
            self.body_simple_decorator()
        elif kind is NodeKind.REPEAT:
            self.body_repeat()
        elif kind is NodeKind.RETRY_UNTIL_SUCCESSFUL:
            self.body_retry()
        elif kind is NodeKind.RATE_CONTROLLER:
            self.body_rate_controller()
        elif kind is NodeKind.RECOVERY:
            self.body_recovery()
        elif kind is NodeKind.ROUND_ROBIN:
            self.body_round_robin()
        elif kind is NodeKind.PIPELINE_SEQUENCE:
            self.body_pipeline()
        elif kind is NodeKind.CONDITION:
            self.body_condition()
        elif kind is NodeKind.ACTION:
            self.body_action()
        elif kind is NodeKind.SET_SV:
            self.body_setsv()
        elif kind is NodeKind.EVAL:
            self.body_eval()
        else:
            raise CompileError(f"no translation for {kind.value}")
        self.postamble()
        # Timed tick option: the node spends one time unit in tick_node, so
        # every transition leaving tick_node is delayed.
        if self.timed_tick():
            src = self.loc("tick_node")
            for t in self.proc.transitions:
                if t.src == src:
                    t.timing = ONE_TICK

    # -- bodies --------------------------------------------------------------

    def body_passthrough(self):
        kid = self.kids[0]
        self.t("tick_node", "wait", "call_child", effect=self.tick_child(kid))
        self.on_child("wait", kid, Status.SUCCESS, "success", "child_success")
        self.on_child("wait", kid, Status.FAILURE, "failure", "child_failure")
        self.on_child("wait", kid, Status.RUNNING, "running", "child_running")
        self.halt_path()

    def body_seq_family(self):
        n = len(self.kids)
        kind = self.node.kind
        next_cell = self.local("next_seq", 1)
        reset = _set_cell(next_cell, 1)
        for i, kid in enumerate(self.kids, 1):
            self.t("tick_node", f"wait_{i}", f"call_{kid.name}",
                   guard=_eq_cell(next_cell, i), effect=self.tick_child(kid))
        for i, kid in enumerate(self.kids, 1):
            w = f"wait_{i}"
            if i < n:
                nxt = self.kids[i]
                self.on_child(w, kid, Status.SUCCESS, f"wait_{i + 1}",
                              f"advance_{nxt.name}", effect=self.tick_child(nxt))
            else:
                self.on_child(w, kid, Status.SUCCESS,
                              self.finish_target("success"),
                              "all_succeeded", effect=reset)
            fail_reset = (None if kind is NodeKind.SEQUENCE_WITH_MEMORY
                          else reset)
            resume = 1 if kind is NodeKind.REACTIVE_SEQUENCE else i
            if kind is NodeKind.SEQUENCE_WITH_MEMORY:
                fail_reset = _set_cell(next_cell, i)
            self.on_child(w, kid, Status.FAILURE,
                          self.finish_target("failure"),
                          f"failed_at_{i}", effect=fail_reset)
            self.on_child(w, kid, Status.RUNNING, "running",
                          f"running_at_{i}",
                          effect=_set_cell(next_cell, resume))
        self.halt_path(reset=reset)

    def body_fb_family(self):
        n = len(self.kids)
        kind = self.node.kind
        next_cell = self.local("next_fb", 1)
        reset = _set_cell(next_cell, 1)
        for i, kid in enumerate(self.kids, 1):
            self.t("tick_node", f"wait_{i}", f"call_{kid.name}",
                   guard=_eq_cell(next_cell, i), effect=self.tick_child(kid))
        for i, kid in enumerate(self.kids, 1):
            w = f"wait_{i}"
            self.on_child(w, kid, Status.SUCCESS,
                          self.finish_target("success"),
                          f"succeeded_at_{i}", effect=reset)
            if i < n:
                nxt = self.kids[i]
                self.on_child(w, kid, Status.FAILURE, f"wait_{i + 1}",
                              f"advance_{nxt.name}", effect=self.tick_child(nxt))
            else:
                self.on_child(w, kid, Status.FAILURE,
                              self.finish_target("failure"),
                              "all_failed", effect=reset)
            resume = 1 if kind is NodeKind.REACTIVE_FALLBACK else i
            self.on_child(w, kid, Status.RUNNING, "running",
                          f"running_at_{i}",
                          effect=_set_cell(next_cell, resume))
        self.halt_path(reset=reset)

    def body_parallel(self):
        n = len(self.kids)
        if self.node.kind is NodeKind.PARALLEL_ALL:
            m = n
        else:
            m = self.node.attrs["success"]
        pend = self.local("pending", 0)
        run = self.local("runmask", 0)
        succ = self.local("succ", 0)
        fail = self.local("fail", 0)
        allmask = (1 << n) - 1
        kids = self.kids
        running = int(Status.RUNNING)
        success = int(Status.SUCCESS)
        v = self.v

        def tick_all(s):
            for k in kids:
                s[k.caller_cell] = v
            s[pend] = allmask

        def tick_runmask(s):
            mask = s[run]
            for i in _bits(mask):
                s[kids[i].caller_cell] = v
            s[pend] = mask
            s[run] = 0

        def all_pending_relinquished(s):
            return all(s[kids[i].caller_cell] == CALLER_NONE
                       for i in _bits(s[pend]))

        def count(s):
            for i in _bits(s[pend]):
                st = s[kids[i].rstatus_cell]
                if st == success:
                    s[succ] += 1
                elif st == running:
                    s[run] |= 1 << i
                else:
                    s[fail] += 1
            s[pend] = 0

        def reset(s):
            s[pend] = s[run] = s[succ] = s[fail] = 0

        # Fresh episode ticks every child; later rounds re-tick only the
        # children that last returned running.
        self.t("tick_node", "collect", "tick_all",
               guard=_eq_cell(run, 0), effect=tick_all)
        self.t("tick_node", "collect", "tick_running",
               guard=_ne_cell(run, 0), effect=tick_runmask)
        self.t("collect", "counted", "count",
               guard=all_pending_relinquished, effect=count)
        self.t("counted", "s_fin", "enough_successes",
               guard=lambda s: s[succ] >= m)
        self.t("counted", "f_fin", "too_many_failures",
               guard=lambda s: s[succ] < m and s[fail] > n - m)
        self.t("counted", "running", "undecided",
               guard=lambda s: s[succ] < m and s[fail] <= n - m)

        halt_flag = bool(self.node.attrs.get("halt"))
        wait_flag = bool(self.node.attrs.get("wait"))
        for fin, status in (("s_fin", "success"), ("f_fin", "failure")):
            if halt_flag:
                def halt_runmask(s):
                    for i in _bits(s[run]):
                        s[kids[i].rstatus_cell] = int(Status.HALT_ME)
                        s[kids[i].caller_cell] = v
                self.t(fin, f"{fin}_hw", "halt_runners",
                       guard=_ne_cell(run, 0), effect=halt_runmask)
                self.t(fin, status, "no_runners",
                       guard=_eq_cell(run, 0), effect=reset)
                self.t(f"{fin}_hw", status, "runners_halted",
                       guard=self.guard_all_relinquished(), effect=reset)
            elif wait_flag:
                # Deciding but deferring the return until runners finish;
                # the re-tick is delayed so the wait consumes ticks.
                self.t(fin, status, "no_runners",
                       guard=_eq_cell(run, 0), effect=reset)
                self.t(fin, f"{fin}_wc", "wait_retick",
                       guard=_ne_cell(run, 0), effect=tick_runmask,
                       timing=ONE_TICK)

                def wait_count(s):
                    for i in _bits(s[pend]):
                        if s[kids[i].rstatus_cell] == running:
                            s[run] |= 1 << i
                    s[pend] = 0
                self.t(f"{fin}_wc", fin, "wait_collect",
                       guard=all_pending_relinquished, effect=wait_count)
            else:
                self.t(fin, status, "abandon_runners", effect=reset)
        self.halt_path(reset=reset)

    def body_simple_decorator(self):
        kid = self.kids[0]
        table = {
            NodeKind.INVERTER: ("failure", "success", "running"),
            NodeKind.FORCE_FAILURE: ("failure", "failure", "running"),
            NodeKind.FORCE_SUCCESS: ("success", "success", "running"),
            NodeKind.KEEP_RUNNING_UNTIL_FAILURE: ("running", "failure", "running"),
        }
        on_s, on_f, on_r = table[self.node.kind]
        self.t("tick_node", "wait", "call_child", effect=self.tick_child(kid))
        self.on_child("wait", kid, Status.SUCCESS, on_s, "child_success")
        self.on_child("wait", kid, Status.FAILURE, on_f, "child_failure")
        self.on_child("wait", kid, Status.RUNNING, on_r, "child_running")
        self.halt_path()

    def body_repeat(self):
        kid = self.kids[0]
        k = self.node.attrs["repeat"]
        cnt = self.local("count", 0)
        self.t("tick_node", "wait", "call_child", effect=self.tick_child(kid))
        self.t("wait", "wait", "repeat_child",
               guard=lambda s: (_returned(kid.caller_cell, kid.rstatus_cell,
                                          Status.SUCCESS)(s) and s[cnt] < k - 1),
               effect=_seq(lambda s: s.__setitem__(cnt, s[cnt] + 1),
                           self.tick_child(kid)))
        self.t("wait", "success", "repeats_done",
               guard=lambda s: (_returned(kid.caller_cell, kid.rstatus_cell,
                                          Status.SUCCESS)(s) and s[cnt] >= k - 1),
               effect=_set_cell(cnt, 0))
        self.on_child("wait", kid, Status.FAILURE, "failure", "child_failure",
                      effect=_set_cell(cnt, 0))
        self.on_child("wait", kid, Status.RUNNING, "running", "child_running")
        self.halt_path(reset=_set_cell(cnt, 0))

    def body_retry(self):
        kid = self.kids[0]
        k = self.node.attrs.get("num_attempts", self.node.attrs.get("num_retries"))
        att = self.local("attempt", 0)
        self.t("tick_node", "wait", "call_child", effect=self.tick_child(kid))
        self.on_child("wait", kid, Status.SUCCESS, "success", "child_success",
                      effect=_set_cell(att, 0))
        self.t("wait", "wait", "retry_child",
               guard=lambda s: (_returned(kid.caller_cell, kid.rstatus_cell,
                                          Status.FAILURE)(s) and s[att] < k - 1),
               effect=_seq(lambda s: s.__setitem__(att, s[att] + 1),
                           self.tick_child(kid)))
        self.t("wait", "failure", "attempts_exhausted",
               guard=lambda s: (_returned(kid.caller_cell, kid.rstatus_cell,
                                          Status.FAILURE)(s) and s[att] >= k - 1),
               effect=_set_cell(att, 0))
        self.on_child("wait", kid, Status.RUNNING, "running", "child_running")
        self.halt_path(reset=_set_cell(att, 0))

    def body_rate_controller(self):
        kid = self.kids[0]
        hz = self.node.attrs.get("hz")
        if hz is None:
            hz = dict(self.node.attrs.get("args", []))["hz"]
        period = max(1, math.ceil(1 / float(hz)))
        elapsed = self.local("elapsed", period)  # fires on the first tick
        self.t("tick_node", "wait", "call_child",
               guard=lambda s: s[elapsed] >= period,
               effect=_seq(_set_cell(elapsed, 1), self.tick_child(kid)))
        self.t("tick_node", "running", "throttled",
               guard=lambda s: s[elapsed] < period,
               effect=lambda s: s.__setitem__(elapsed, s[elapsed] + 1))
        self.on_child("wait", kid, Status.SUCCESS, "success", "child_success")
        self.on_child("wait", kid, Status.FAILURE, "failure", "child_failure")
        self.on_child("wait", kid, Status.RUNNING, "running", "child_running")
        self.halt_path(reset=_set_cell(elapsed, period))

    def body_recovery(self):
        first, recov = self.kids
        bound = self.node.attrs["num_retries"]
        retry = self.local("retry", 0)
        phase = self.local("phase", 1)
        reset = _seq(_set_cell(retry, 0), _set_cell(phase, 1))
        self.t("tick_node", "wait_1", f"call_{first.name}",
               guard=_eq_cell(phase, 1), effect=self.tick_child(first))
        self.t("tick_node", "wait_2", f"call_{recov.name}",
               guard=_eq_cell(phase, 2), effect=self.tick_child(recov))
        self.on_child("wait_1", first, Status.SUCCESS, "success",
                      "child_success", effect=reset)
        self.t("wait_1", "wait_2", "try_recovery",
               guard=lambda s: (_returned(first.caller_cell, first.rstatus_cell,
                                          Status.FAILURE)(s) and s[retry] < bound),
               effect=self.tick_child(recov))
        self.t("wait_1", "failure", "retries_exhausted",
               guard=lambda s: (_returned(first.caller_cell, first.rstatus_cell,
                                          Status.FAILURE)(s) and s[retry] >= bound),
               effect=reset)
        self.on_child("wait_1", first, Status.RUNNING, "running",
                      "child_running", effect=_set_cell(phase, 1))
        self.on_child("wait_2", recov, Status.SUCCESS, "wait_1", "recovered",
                      effect=_seq(lambda s: s.__setitem__(retry, s[retry] + 1),
                                  _set_cell(phase, 1),
                                  self.tick_child(first)))
        self.on_child("wait_2", recov, Status.FAILURE, "failure",
                      "recovery_failed", effect=reset)
        self.on_child("wait_2", recov, Status.RUNNING, "running",
                      "recovery_running", effect=_set_cell(phase, 2))
        self.halt_path(reset=reset)

    def body_round_robin(self):
        n = len(self.kids)
        idx = self.local("index", 1)
        failed = self.local("failed", 0)
        reset = _seq(_set_cell(idx, 1), _set_cell(failed, 0))
        for i, kid in enumerate(self.kids, 1):
            self.t("tick_node", f"wait_{i}", f"call_{kid.name}",
                   guard=_eq_cell(idx, i), effect=self.tick_child(kid))
        for i, kid in enumerate(self.kids, 1):
            w = f"wait_{i}"
            nxt_i = i % n + 1
            nxt = self.kids[nxt_i - 1]
            self.on_child(w, kid, Status.SUCCESS, "success", "child_success",
                          effect=_seq(_set_cell(idx, nxt_i),
                                      _set_cell(failed, 0)))
            self.t(w, f"wait_{nxt_i}", f"advance_{nxt.name}",
                   guard=lambda s, kid=kid: (
                       _returned(kid.caller_cell, kid.rstatus_cell,
                                 Status.FAILURE)(s) and s[failed] < n - 1),
                   effect=_seq(lambda s: s.__setitem__(failed, s[failed] + 1),
                               _set_cell(idx, nxt_i),
                               self.tick_child(nxt)))
            self.t(w, "failure", "all_failed",
                   guard=lambda s, kid=kid: (
                       _returned(kid.caller_cell, kid.rstatus_cell,
                                 Status.FAILURE)(s) and s[failed] >= n - 1),
                   effect=reset)
            self.on_child(w, kid, Status.RUNNING, "running", "child_running")
        self.halt_path(reset=reset)

    def body_pipeline(self):
        n = len(self.kids)
        frontier = self.local("frontier", 1)
        reset = _set_cell(frontier, 1)
        first = self.kids[0]
        self.t("tick_node", "wait_1", f"call_{first.name}",
               effect=self.tick_child(first))
        for i, kid in enumerate(self.kids, 1):
            w = f"wait_{i}"
            self.on_child(w, kid, Status.FAILURE,
                          self.finish_target("failure"), f"failed_at_{i}",
                          effect=reset)
            if i < n:
                nxt = self.kids[i]
                # Children before the frontier are re-ticked every pass; the
                # scan continues past them whether they succeed or run.
                for status, word in ((Status.SUCCESS, "done"),
                                     (Status.RUNNING, "busy")):
                    self.t(w, f"wait_{i + 1}", f"scan_{word}_{i}",
                           guard=lambda s, kid=kid, status=status, i=i: (
                               _returned(kid.caller_cell, kid.rstatus_cell,
                                         status)(s) and s[frontier] > i),
                           effect=self.tick_child(nxt))
                self.t(w, "running", f"frontier_advance_{i}",
                       guard=lambda s, kid=kid, i=i: (
                           _returned(kid.caller_cell, kid.rstatus_cell,
                                     Status.SUCCESS)(s) and s[frontier] == i),
                       effect=_set_cell(frontier, i + 1))
            else:
                self.t(w, self.finish_target("success"), "pipeline_done",
                       guard=_returned(kid.caller_cell, kid.rstatus_cell,
                                       Status.SUCCESS),
                       effect=reset)
            self.t(w, "running", f"running_at_{i}",
                   guard=lambda s, kid=kid, i=i: (
                       _returned(kid.caller_cell, kid.rstatus_cell,
                                 Status.RUNNING)(s) and s[frontier] == i))
        self.halt_path(reset=reset)

    # -- leaves --------------------------------------------------------------

    def body_condition(self):
        self.t("tick_node", "success", "outcome_success",
               tag=("outcome", "success"))
        self.t("tick_node", "failure", "outcome_failure",
               tag=("outcome", "failure"))
        self.halt_path()

    def body_action(self):
        self.t("tick_node", "success", "outcome_success",
               tag=("outcome", "success"))
        self.t("tick_node", "failure", "outcome_failure",
               tag=("outcome", "failure"))
        if not self.node.attrs.get("SF"):
            self.t("tick_node", "running", "outcome_running",
                   tag=("outcome", "running"))
        self.halt_path()

    def body_setsv(self):
        sv_name = self.node.attrs.get("sv", self.node.attrs.get("SV"))
        slot = self.model.sv(sv_name)
        decl = slot.decl
        if decl.is_enumerated:
            if decl.transitions == ALL_PAIRS:
                for w in decl.states:
                    self.t("tick_node", "success", f"set_{w}",
                           effect=_set_cell(slot.cell, slot.encode(w)),
                           tag=("setsv", sv_name, w))
            else:
                seen = set()
                for a, b in decl.transitions:
                    self.t("tick_node", "success", f"set_{a}_{b}",
                           guard=_eq_cell(slot.cell, slot.encode(a)),
                           effect=_set_cell(slot.cell, slot.encode(b)),
                           tag=("setsv", sv_name, b))
                    seen.add((a, b))
                # keeping the current value is always an allowed choice
                for a in decl.states:
                    if (a, a) not in seen:
                        self.t("tick_node", "success", f"keep_{a}",
                               guard=_eq_cell(slot.cell, slot.encode(a)),
                               tag=("setsv", sv_name, a))
        else:
            for w in range(decl.min, decl.max + 1):
                self.t("tick_node", "success", f"set_{w}",
                       effect=_set_cell(slot.cell, w),
                       tag=("setsv", sv_name, w))
        self.halt_path()

    def body_eval(self):
        expr = self.node.expr
        if isinstance(expr, Assign):
            slot = self.comp.model.sv(expr.sv_name)
            decl = slot.decl
            value = self.comp.compile_int(expr.value) if not decl.is_enumerated \
                else self.comp._encode_literal(*self.comp._value(expr.value),
                                               f"enum:{slot.name}")
            if decl.is_enumerated:
                if decl.transitions == ALL_PAIRS:
                    def legal(s):
                        return True
                else:
                    allowed = {(slot.encode(a), slot.encode(b))
                               for a, b in decl.transitions}

                    def legal(s):
                        new = value(s)
                        return new == s[slot.cell] or (s[slot.cell], new) in allowed
            else:
                lo, hi = decl.min, decl.max

                def legal(s):
                    return lo <= value(s) <= hi

            def assign(s):
                s[slot.cell] = value(s)
            self.t("tick_node", "success", "assign_ok",
                   guard=legal, effect=assign)
            self.t("tick_node", "failure", "assign_illegal",
                   guard=lambda s: not legal(s))
        else:
            cond = self.comp.compile_condition(expr)
            self.t("tick_node", "success", "eval_true", guard=cond)
            self.t("tick_node", "failure", "eval_false",
                   guard=lambda s: not cond(s))
        self.halt_path()
