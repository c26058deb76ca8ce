"""Explicit exploration of the reachable state graph of a composed model."""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field


class LimitExceeded(Exception):
    def __init__(self, reason, graph):
        self.reason = reason
        self.graph = graph
        super().__init__(f"exploration limit exceeded: {reason}")


@dataclass
class Trace:
    """A path through the graph: states[0] is the start, steps[i] is the
    (label, dst_state_id) edge taken from states[i]."""
    states: list
    steps: list  # (label tuple of transition ids, dst id)

    def __len__(self):
        return len(self.steps)


@dataclass
class StateGraph:
    model: object
    states: list = field(default_factory=list)  # id -> cell tuple
    index: dict = field(default_factory=dict)  # cell tuple -> id
    edges: list = field(default_factory=list)  # id -> [(label, dst id)]
    initial: int = 0
    complete: bool = True

    def add_state(self, cells):
        sid = self.index.get(cells)
        if sid is None:
            sid = len(self.states)
            self.index[cells] = sid
            self.states.append(cells)
            self.edges.append([])
        return sid

    @property
    def n_states(self):
        return len(self.states)

    @property
    def n_edges(self):
        return sum(len(e) for e in self.edges)

    def cells(self, sid):
        return self.states[sid]

    def terminal_status(self, sid):
        return self.model.terminal_status(self.states[sid])

    def is_sink(self, sid):
        return not self.edges[sid]

    def dump(self):
        """Line-oriented graph dump with stable ordering."""
        model = self.model
        out = [f"graph states={self.n_states} edges={self.n_edges} "
               f"initial={self.initial} complete={int(self.complete)}"]
        for sid, cells in enumerate(self.states):
            out.append(f"state {sid} {model.describe_state(cells)}")
        for sid, outgoing in enumerate(self.edges):
            for label, dst in outgoing:
                names = "+".join(
                    f"{model.processes[model.transitions[t].proc].name}"
                    f".{model.transitions[t].label}" for t in label)
                out.append(f"edge {sid} {names} {dst}")
        return "\n".join(out) + "\n"


def explore(model, max_states=5_000_000, max_seconds=600.0):
    """Breadth-first fixed point over the successor relation. Raises
    LimitExceeded carrying the partial graph when a budget trips."""
    graph = StateGraph(model=model)
    graph.add_state(model.initial)
    work = deque([0])
    deadline = time.monotonic() + max_seconds
    checked = 0
    while work:
        sid = work.popleft()
        cells = graph.states[sid]
        for label, nxt in model.successors(cells):
            dst = graph.index.get(nxt)
            if dst is None:
                if len(graph.states) >= max_states:
                    graph.complete = False
                    raise LimitExceeded(f"max_states {max_states}", graph)
                dst = graph.add_state(nxt)
                work.append(dst)
            graph.edges[sid].append((label, dst))
        checked += 1
        if checked % 4096 == 0 and time.monotonic() > deadline:
            graph.complete = False
            raise LimitExceeded(f"max_seconds {max_seconds}", graph)
    return graph


def find_path(graph: StateGraph, predicate):
    """Shortest path (BFS over edges) from the initial state to a state
    satisfying `predicate(cells)`. Returns a Trace or None."""
    model = graph.model
    if predicate(graph.states[graph.initial]):
        return Trace(states=[graph.initial], steps=[])
    parent = {graph.initial: None}
    work = deque([graph.initial])
    goal = None
    while work and goal is None:
        sid = work.popleft()
        for label, dst in graph.edges[sid]:
            if dst not in parent:
                parent[dst] = (sid, label)
                if predicate(graph.states[dst]):
                    goal = dst
                    break
                work.append(dst)
    if goal is None:
        return None
    steps = []
    sid = goal
    while parent[sid] is not None:
        prev, label = parent[sid]
        steps.append((label, sid))
        sid = prev
    steps.reverse()
    states = [graph.initial] + [dst for _, dst in steps]
    return Trace(states=states, steps=steps)


def quotient_stats(graph: StateGraph):
    terminal = set()
    for cells in graph.states:
        status = graph.model.terminal_status(cells)
        if status is not None:
            terminal.add(status)
    return {
        "states": graph.n_states,
        "transitions": graph.n_edges,
        "terminal_statuses": terminal,
    }


def urgent_cycles(graph: StateGraph):
    """Cycles made only of urgent steps would let a phase never end; the
    generated automata must not contain any. Returns one offending state id
    list per cycle found (empty list expected)."""
    model = graph.model
    succ = [[dst for label, dst in outgoing
             if not model.is_boundary_label(label)]
            for outgoing in graph.edges]
    return _find_sccs_with_cycle(succ)


def render_trace(graph: StateGraph, trace: Trace):
    """Human-readable trace text; tick boundaries are marked."""
    model = graph.model
    out = [f"trace length={len(trace.steps)}"]
    out.append(f"  0: {model.describe_state(graph.states[trace.states[0]])}")
    tick = 0
    for i, (label, dst) in enumerate(trace.steps, 1):
        names = " ".join(
            f"{model.processes[model.transitions[t].proc].name}"
            f".{model.transitions[t].label}" for t in label)
        if model.is_boundary_label(label):
            tick += 1
            out.append(f"  -- tick {tick} --")
        out.append(f"  {i}: [{names}] "
                   f"{model.describe_state(graph.states[dst])}")
    return "\n".join(out) + "\n"


def _find_sccs_with_cycle(succ):
    """Tarjan SCCs (iterative); returns components that contain a cycle."""
    n = len(succ)
    index = [0] * n
    low = [0] * n
    on_stack = [False] * n
    visited = [False] * n
    stack = []
    counter = [1]
    out = []

    for root in range(n):
        if visited[root]:
            continue
        call = [(root, 0)]
        while call:
            v, pi = call[-1]
            if pi == 0:
                visited[v] = True
                index[v] = low[v] = counter[0]
                counter[0] += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            while pi < len(succ[v]):
                w = succ[v][pi]
                pi += 1
                if not visited[w]:
                    call[-1] = (v, pi)
                    call.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            call.pop()
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                if len(comp) > 1 or v in succ[v]:
                    out.append(comp)
            if call:
                pv, _ = call[-1]
                low[pv] = min(low[pv], low[v])
    return out
