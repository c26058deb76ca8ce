"""Real-time execution of a compiled model against an action provider.

The engine owns the model state. Each cycle it fires urgent transitions to
quiescence (consulting the provider wherever a leaf automaton offers a
choice), then sleeps to the next tick boundary and fires the delayed
transitions. Leaf nondeterminism is resolved through the tags the compiler
attached to choice transitions.
"""

from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass, field

from .model import CALLER_NONE, ONE_TICK, Status, URGENT
from .syntax import ALL_PAIRS, Add, ArgRef, Literal, Mul, NodeKind, SvRef


class ProviderError(Exception):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class ScriptExhausted(ProviderError):
    pass


class ScriptError(Exception):
    pass


# --------------------------------------------------------------------------
# outcome scripts

@dataclass
class OutcomeScript:
    """Deterministic leaf outcomes keyed by invocation ordinal (1-based),
    and environment-variable values keyed by tick index."""
    actions: dict = field(default_factory=dict)    # (name, k) -> (outcome, latency)
    conditions: dict = field(default_factory=dict)  # (name, k) -> outcome
    setsv: dict = field(default_factory=dict)       # (name, k) -> value
    env: dict = field(default_factory=dict)         # (sv, tick) -> value

    def dump(self):
        lines = []
        for (name, k), (outcome, latency) in sorted(self.actions.items()):
            lines.append(f"node {name} ordinal {k} -> {outcome} latency {latency}")
        for (name, k), outcome in sorted(self.conditions.items()):
            lines.append(f"condition {name} ordinal {k} -> {outcome}")
        for (name, k), value in sorted(self.setsv.items()):
            lines.append(f"setsv {name} ordinal {k} -> {value}")
        for (sv, tick), value in sorted(self.env.items()):
            lines.append(f"env {sv} tick {tick} -> {value}")
        return "\n".join(lines) + "\n"


def parse_script(text):
    script = OutcomeScript()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        try:
            head = words[0]
            if head == "node":
                if (words[2], words[4], words[6]) != ("ordinal", "->", "latency"):
                    raise ValueError
                outcome = _outcome(words[5], ("success", "failure"))
                script.actions[(words[1], int(words[3]))] = (outcome, int(words[7]))
            elif head == "condition":
                if (words[2], words[4]) != ("ordinal", "->"):
                    raise ValueError
                outcome = _outcome(words[5], ("success", "failure"))
                script.conditions[(words[1], int(words[3]))] = outcome
            elif head == "setsv":
                if (words[2], words[4]) != ("ordinal", "->"):
                    raise ValueError
                script.setsv[(words[1], int(words[3]))] = words[5]
            elif head == "env":
                if (words[2], words[4]) != ("tick", "->"):
                    raise ValueError
                script.env[(words[1], int(words[3]))] = words[5]
            else:
                raise ValueError
        except (IndexError, ValueError):
            raise ScriptError(f"line {lineno}: cannot parse {raw!r}") from None
    return script


def _outcome(word, allowed):
    if word not in allowed:
        raise ValueError
    return word


# --------------------------------------------------------------------------
# providers

class ActionProvider:
    """Host-side effectors. The default implementations make every action
    and condition succeed immediately and leave the environment alone."""

    def start_action(self, node_name, id_attr, args):
        return object()

    def poll(self, handle):
        """None while still running, else 'success' | 'failure'."""
        return "success"

    def halt_action(self, handle):
        pass

    def check_condition(self, node_name, id_attr, args):
        return "success"

    def set_sv(self, sv_name, current):
        return current

    def read_env_sv(self, sv_name, current):
        """New value for an environment-driven SV, or None to leave it."""
        return None

    def on_tick(self, tick):
        pass


class _Handle:
    __slots__ = ("outcome", "remaining")

    def __init__(self, outcome, remaining):
        self.outcome = outcome
        self.remaining = remaining


class ScriptedProvider(ActionProvider):
    """Replays an outcome script; entries missing from the script are drawn
    from a seeded generator, or raise ScriptExhausted without a seed."""

    def __init__(self, model, script=None, seed=None):
        self.model = model
        self.script = script or OutcomeScript()
        self.rng = random.Random(seed) if seed is not None else None
        self.ordinals = {}
        self.handles = {}
        self.tick = 0

    def _next_ordinal(self, name):
        k = self.ordinals.get(name, 0) + 1
        self.ordinals[name] = k
        return k

    def on_tick(self, tick):
        self.tick = tick
        for handle in self.handles.values():
            if handle.remaining > 0:
                handle.remaining -= 1

    def start_action(self, node_name, id_attr, args):
        k = self._next_ordinal(node_name)
        entry = self.script.actions.get((node_name, k))
        if entry is None:
            if self.rng is None:
                raise ScriptExhausted(f"no script entry for node {node_name} "
                                      f"ordinal {k}")
            info = self.model.node(node_name)
            sf = bool(info.node.attrs.get("SF"))
            outcome = self.rng.choice(["success", "failure"])
            latency = 0 if sf else self.rng.choice([0, 1, 2])
            entry = (outcome, latency)
        handle = _Handle(*entry)
        self.handles[id(handle)] = handle
        return id(handle)

    def poll(self, handle):
        h = self.handles.get(handle)
        if h is None:
            raise ProviderError("poll on unknown or halted handle")
        if h.remaining > 0:
            return None
        del self.handles[handle]
        return h.outcome

    def halt_action(self, handle):
        self.handles.pop(handle, None)

    def check_condition(self, node_name, id_attr, args):
        k = self._next_ordinal(node_name)
        outcome = self.script.conditions.get((node_name, k))
        if outcome is None:
            if self.rng is None:
                raise ScriptExhausted(f"no script entry for condition "
                                      f"{node_name} ordinal {k}")
            outcome = self.rng.choice(["success", "failure"])
        return outcome

    def set_sv(self, sv_name, current):
        k = self._next_ordinal(f"setsv:{sv_name}")
        decl = self.model.sv(sv_name).decl
        value = self.script.setsv.get((sv_name, k))
        if value is None:
            if self.rng is None:
                raise ScriptExhausted(f"no script entry for setsv {sv_name} "
                                      f"ordinal {k}")
            value = self.rng.choice(sv_choices(decl, current))
        return value if decl.is_enumerated else int(value)

    def read_env_sv(self, sv_name, current):
        decl = self.model.sv(sv_name).decl
        value = self.script.env.get((sv_name, self.tick))
        if value is None:
            if self.rng is None:
                return None
            value = self.rng.choice(sv_choices(decl, current))
        return value if decl.is_enumerated else int(value)


def sv_choices(decl, current):
    """Values an SV may take next, including keeping the current one."""
    if not decl.is_enumerated:
        return list(range(decl.min, decl.max + 1))
    if decl.transitions == ALL_PAIRS:
        return list(decl.states)
    out = [current]
    for a, b in decl.transitions:
        if a == current and b != current:
            out.append(b)
    return out


# --------------------------------------------------------------------------
# traces

@dataclass
class Event:
    tick: int
    ts_ms: float
    kind: str  # ticked|returned|halting|halted|sv_changed|root_terminal|tick_overrun
    node: str | None = None
    status: str | None = None
    sv: str | None = None
    old: object = None
    new: object = None

    def as_dict(self):
        d = {"tick": self.tick, "ts_ms": round(self.ts_ms, 3),
             "kind": self.kind}
        if self.node is not None:
            d["node"] = self.node
        if self.status is not None:
            d["status"] = self.status
        if self.sv is not None:
            d.update(sv=self.sv, old=self.old, new=self.new)
        return d


@dataclass
class ExecutionTrace:
    events: list = field(default_factory=list)

    def observables(self):
        """(node, kind, status/sv-change) triples for differential checks;
        timestamps and overruns excluded."""
        out = []
        for e in self.events:
            if e.kind == "tick_overrun":
                continue
            if e.kind == "sv_changed":
                out.append((e.kind, e.sv, e.old, e.new))
            elif e.kind in ("returned", "root_terminal"):
                out.append((e.kind, e.node, e.status))
            else:
                out.append((e.kind, e.node))
        return out


def emit_trace(trace, fmt="lines"):
    if fmt == "lines":
        lines = [f"trace events={len(trace.events)}"]
        for e in trace.events:
            parts = [f"tick={e.tick}", f"ts={e.ts_ms:.1f}", f"kind={e.kind}"]
            if e.node is not None:
                parts.insert(2, f"node={e.node}")
            if e.status is not None:
                parts.append(f"status={e.status}")
            if e.sv is not None:
                parts.append(f"sv={e.sv}")
                parts.append(f"old={e.old}")
                parts.append(f"new={e.new}")
            lines.append(" ".join(parts))
        return ("\n".join(lines) + "\n").encode()
    if fmt == "jsonl":
        lines = [json.dumps({"kind": "trace_header",
                             "events": len(trace.events)})]
        lines += [json.dumps(e.as_dict()) for e in trace.events]
        return ("\n".join(lines) + "\n").encode()
    raise ValueError(f"unknown trace format {fmt!r}")


def parse_trace_jsonl(data):
    trace = ExecutionTrace()
    for line in data.decode().splitlines():
        d = json.loads(line)
        if d.get("kind") == "trace_header":
            continue
        trace.events.append(Event(
            tick=d["tick"], ts_ms=d["ts_ms"], kind=d["kind"],
            node=d.get("node"), status=d.get("status"),
            sv=d.get("sv"), old=d.get("old"), new=d.get("new")))
    return trace


# --------------------------------------------------------------------------
# the engine

@dataclass
class RunConfig:
    tick_ms: float = 100.0  # 0 disables pacing (virtual clock)
    max_ticks: int | None = None
    seed: int | None = None


@dataclass
class RunResult:
    final: str  # "success" | "failure" | "stopped"
    trace: ExecutionTrace
    ticks: int = 0
    # every fired step, for offline-graph containment checks
    states: list = field(default_factory=list)
    labels: list = field(default_factory=list)


def resolve_args(node, model, cells):
    """Evaluate a leaf's :args pairs against the current state; opaque
    payloads pass through unchanged."""
    args = node.attrs.get("args")
    if not args:
        return {}
    out = {}
    for key, expr in args:
        out[key] = _eval_arg(expr, model, cells)
    return out


def _eval_arg(expr, model, cells):
    if isinstance(expr, Literal):
        return expr.value
    if isinstance(expr, (ArgRef, SvRef)):
        if expr.name in model.svs:
            slot = model.sv(expr.name)
            return slot.decode(cells[slot.cell])
        return f"${expr.name}"
    if isinstance(expr, (Add, Mul)):
        a = _eval_arg(expr.left, model, cells)
        b = _eval_arg(expr.right, model, cells)
        return a + b if isinstance(expr, Add) else a * b
    return repr(expr)


class _Engine:
    def __init__(self, model, provider, config):
        self.model = model
        self.provider = provider
        self.config = config
        self.trace = ExecutionTrace()
        self.result = RunResult(final="stopped", trace=self.trace)
        self.handles = {}  # node name -> provider handle
        self.tick = 0
        self.virtual = config.tick_ms <= 0
        self.period = config.tick_ms / 1000.0
        self.start = time.monotonic()
        self.halted_loc = {}
        for name in model.node_order:
            proc = model.process_of(name)
            self.halted_loc[proc.index] = proc.loc_index("halted")

    def now_ms(self):
        if self.virtual:
            return float(self.tick * self.config.tick_ms)
        return (time.monotonic() - self.start) * 1000.0

    # -- provider-backed choice resolution -----------------------------------

    def resolve(self, proc, enabled, cells):
        if len(enabled) == 1:
            return enabled[0]
        tags = [t.events for t in enabled]
        if all(tag and tag[0] == "outcome" for tag in tags):
            want = self.leaf_outcome(proc, cells)
            for t in enabled:
                if t.events[1] == want:
                    return t
            raise ProviderError(
                f"provider chose '{want}' for {proc.name} but the node "
                "cannot return it", self.result)
        if all(tag and tag[0] == "setsv" for tag in tags):
            sv_name = tags[0][1]
            slot = self.model.sv(sv_name)
            want = self.provider.set_sv(sv_name, slot.decode(cells[slot.cell]))
            for t in enabled:
                if t.events[2] == want:
                    return t
            raise ProviderError(
                f"setsv {sv_name}: '{want}' is not an allowed transition "
                f"from '{slot.decode(cells[slot.cell])}'", self.result)
        if all(tag and tag[0] == "env" for tag in tags):
            sv_name = tags[0][1]
            slot = self.model.sv(sv_name)
            current = slot.decode(cells[slot.cell])
            want = self.provider.read_env_sv(sv_name, current)
            if want is None or want == current:
                want = None  # stutter
            for t in enabled:
                if t.events[2] == want:
                    return t
            raise ProviderError(
                f"env {sv_name}: '{want}' is not an allowed transition "
                f"from '{current}'", self.result)
        raise ProviderError(
            f"untagged nondeterminism in process {proc.name}", self.result)

    def leaf_outcome(self, proc, cells):
        info = self.model.node(proc.name)
        node = info.node
        args = resolve_args(node, self.model, cells)
        if info.kind == NodeKind.CONDITION.value:
            return self.provider.check_condition(info.name, node.id_attr, args)
        handle = self.handles.get(info.name)
        if handle is None:
            handle = self.provider.start_action(info.name, node.id_attr, args)
            self.handles[info.name] = handle
        outcome = self.provider.poll(handle)
        if outcome is None:
            return "running"
        del self.handles[info.name]
        return outcome

    # -- event derivation -----------------------------------------------------

    def record(self, pre, post, label):
        model = self.model
        ts = self.now_ms()
        halt_req = int(Status.HALT_ME)
        for slot in model.svs.values():
            if pre[slot.cell] != post[slot.cell]:
                self.trace.events.append(Event(
                    self.tick, ts, "sv_changed", sv=slot.name,
                    old=slot.decode(pre[slot.cell]),
                    new=slot.decode(post[slot.cell])))
        for name in model.node_order:
            info = model.nodes[name]
            proc = model.processes[info.process]
            halting = (pre[info.rstatus_cell] != halt_req
                       and post[info.rstatus_cell] == halt_req)
            if halting:
                self.trace.events.append(Event(self.tick, ts, "halting",
                                               node=name))
            if (pre[info.caller_cell] == CALLER_NONE
                    and post[info.caller_cell] != CALLER_NONE
                    and not halting):
                self.trace.events.append(Event(self.tick, ts, "ticked",
                                               node=name))
            halted = self.halted_loc[proc.index]
            if pre[proc.loc_cell] != halted and post[proc.loc_cell] == halted:
                self.trace.events.append(Event(self.tick, ts, "halted",
                                               node=name))
                handle = self.handles.pop(name, None)
                if handle is not None:
                    self.provider.halt_action(handle)
            if (pre[info.caller_cell] != CALLER_NONE
                    and post[info.caller_cell] == CALLER_NONE):
                status = Status(post[info.rstatus_cell]).name.lower()
                self.trace.events.append(Event(self.tick, ts, "returned",
                                               node=name, status=status))
        if not model.is_terminal(pre) and model.is_terminal(post):
            status = model.terminal_status(post).name.lower()
            self.trace.events.append(Event(self.tick, ts, "root_terminal",
                                           node=model.tree.canonical_name,
                                           status=status))
        self.result.labels.append(label)
        self.result.states.append(post)

    # -- main loop ------------------------------------------------------------

    def run(self):
        model = self.model
        cells = model.initial
        self.result.states.append(cells)
        try:
            while True:
                cells = self.urgent_phase(cells)
                status = model.terminal_status(cells)
                if status is not None:
                    self.result.final = status.name.lower()
                    break
                if (self.config.max_ticks is not None
                        and self.tick >= self.config.max_ticks):
                    self.result.final = "stopped"
                    break
                cells = self.boundary(cells)
        finally:
            for name, handle in list(self.handles.items()):
                self.provider.halt_action(handle)
            self.handles.clear()
            self.result.ticks = self.tick
        return self.result

    def urgent_phase(self, cells):
        model = self.model
        while True:
            fired = False
            for proc in model.processes:
                enabled = [t for t in proc.by_loc[cells[proc.loc_cell]]
                           if t.timing == URGENT and t.enabled(cells)]
                if not enabled:
                    continue
                t = self.resolve(proc, enabled, cells)
                post = model.fire(cells, (t,))
                self.record(cells, post, (t.tid,))
                cells = post
                fired = True
                break
            if not fired:
                return cells

    def boundary(self, cells):
        model = self.model
        self.tick += 1
        if not self.virtual:
            target = self.start + self.tick * self.period
            now = time.monotonic()
            if now > target:
                self.trace.events.append(Event(
                    self.tick, (now - self.start) * 1000.0, "tick_overrun"))
            else:
                time.sleep(target - now)
        self.provider.on_tick(self.tick)
        combo = []
        for proc in model.processes:
            enabled = [t for t in proc.by_loc[cells[proc.loc_cell]]
                       if t.timing == ONE_TICK and t.enabled(cells)]
            if not enabled:
                continue
            combo.append(self.resolve(proc, enabled, cells))
        if not combo:
            raise ProviderError("model is quiescent but not terminal",
                                self.result)
        post = model.fire(cells, tuple(combo))
        self.record(cells, post, tuple(t.tid for t in combo))
        return post


def run(model, provider=None, config=None):
    config = config or RunConfig()
    if provider is None:
        provider = ScriptedProvider(model, seed=config.seed)
    return _Engine(model, provider, config).run()
