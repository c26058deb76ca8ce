"""Composed model: per-node automata over a shared record array.

A global state is a flat tuple of integer cells: one location cell per
process, one cell per local variable, caller/rstatus cells per tree node,
and one cell per state variable. Transitions carry guard/effect closures
over a mutable copy of that tuple.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class Status(enum.IntEnum):
    NO_RET = 0
    SUCCESS = 1
    FAILURE = 2
    RUNNING = 3
    HALT_ME = 4


CALLER_NONE = -1

URGENT = 0
ONE_TICK = 1


class TickSemantics(enum.Enum):
    ROOT_ONLY = "root"
    LEAVES = "leaves"
    ALL_NODES = "all"


@dataclass
class Transition:
    proc: int
    src: int
    dst: int
    timing: int
    label: str
    guard: object = None  # callable(cells) -> bool, or None for always
    effect: object = None  # callable(cells) -> None
    events: tuple = ()  # static descriptors used by the runtime tracer
    tid: int = -1

    def enabled(self, cells):
        return self.guard is None or self.guard(cells)

    def fire(self, cells):
        if self.effect is not None:
            self.effect(cells)


@dataclass
class Process:
    index: int
    name: str
    kind: str  # node kind value, "sv", or "ticker"
    loc_cell: int
    locations: list[str] = field(default_factory=list)
    locals: dict[str, int] = field(default_factory=dict)  # name -> cell
    transitions: list[Transition] = field(default_factory=list)
    by_loc: list[list[Transition]] = field(default_factory=list)

    def loc_index(self, name):
        try:
            return self.locations.index(name)
        except ValueError:
            raise KeyError(f"process {self.name} has no location '{name}'") from None

    def finish(self):
        self.by_loc = [[] for _ in self.locations]
        for t in self.transitions:
            self.by_loc[t.src].append(t)


@dataclass
class SvSlot:
    name: str
    cell: int
    values: list | None  # enumerated value names, or None for bounded ints
    decl: object = None
    environment: bool = False

    def encode(self, value):
        if self.values is None:
            return int(value)
        return self.values.index(value)

    def decode(self, raw):
        if self.values is None:
            return raw
        return self.values[raw]


@dataclass
class NodeInfo:
    name: str
    process: int
    caller_cell: int
    rstatus_cell: int
    kind: str
    leaf: bool
    node: object = None  # validated NodeAst


class ComposedModel:
    def __init__(self, tick_semantics):
        self.tick_semantics = tick_semantics
        self.processes: list[Process] = []
        self.transitions: list[Transition] = []
        self.nodes: dict[str, NodeInfo] = {}
        self.node_order: list[str] = []
        self.svs: dict[str, SvSlot] = {}
        self.initial: tuple = ()
        self.ticker: Process | None = None
        self.ticker_terminal = {}  # location index -> Status
        self._ncells = 0

    # -- construction helpers -----------------------------------------------

    def alloc_cell(self):
        cell = self._ncells
        self._ncells += 1
        return cell

    def add_process(self, name, kind):
        proc = Process(index=len(self.processes), name=name, kind=kind,
                       loc_cell=self.alloc_cell())
        self.processes.append(proc)
        return proc

    def add_transition(self, t: Transition):
        t.tid = len(self.transitions)
        self.transitions.append(t)
        self.processes[t.proc].transitions.append(t)

    def finish(self, initial_cells):
        for proc in self.processes:
            proc.finish()
        self.initial = tuple(initial_cells)

    # -- queries ------------------------------------------------------------

    def node(self, name) -> NodeInfo:
        try:
            return self.nodes[name]
        except KeyError:
            raise KeyError(f"unknown node '{name}'") from None

    def sv(self, name) -> SvSlot:
        try:
            return self.svs[name]
        except KeyError:
            raise KeyError(f"unknown state variable '{name}'") from None

    def process_of(self, node_name) -> Process:
        return self.processes[self.node(node_name).process]

    def is_terminal(self, cells):
        return cells[self.ticker.loc_cell] in self.ticker_terminal

    def terminal_status(self, cells):
        return self.ticker_terminal.get(cells[self.ticker.loc_cell])

    def location_of(self, cells, node_name):
        proc = self.process_of(node_name)
        return proc.locations[cells[proc.loc_cell]]

    # -- successor relation -------------------------------------------------

    def enabled_urgent(self, cells):
        out = []
        for proc in self.processes:
            for t in proc.by_loc[cells[proc.loc_cell]]:
                if t.timing == URGENT and t.enabled(cells):
                    out.append(t)
        return out

    def one_tick_choices(self, cells):
        """Per-process lists of enabled delayed transitions at a boundary."""
        choices = []
        for proc in self.processes:
            enabled = [t for t in proc.by_loc[cells[proc.loc_cell]]
                       if t.timing == ONE_TICK and t.enabled(cells)]
            if enabled:
                choices.append(enabled)
        return choices

    def fire(self, cells, transitions):
        work = list(cells)
        for t in transitions:
            t.fire(work)
            work[self.processes[t.proc].loc_cell] = t.dst
        return tuple(work)

    def successors(self, cells):
        """Yields (label, successor). A label is a tuple of transition ids;
        multi-id labels are tick-boundary steps."""
        urgent = self.enabled_urgent(cells)
        if urgent:
            for t in urgent:
                yield (t.tid,), self.fire(cells, (t,))
            return
        if self.is_terminal(cells):
            return
        choices = self.one_tick_choices(cells)
        if not choices:
            return
        for combo in _product(choices):
            yield tuple(t.tid for t in combo), self.fire(cells, combo)

    def is_boundary_label(self, label):
        """A step label crosses a tick boundary iff it fired delayed
        transitions (these only fire when no urgent transition is enabled)."""
        return self.transitions[label[0]].timing == ONE_TICK

    # -- exports ------------------------------------------------------------

    def dump(self):
        """Deterministic textual dump for diffing."""
        lines = [f"model tick_semantics={self.tick_semantics.value} "
                 f"processes={len(self.processes)} cells={self._ncells}"]
        for proc in self.processes:
            lines.append(f"process {proc.index} {proc.name} kind={proc.kind}")
            lines.append("  locations " + " ".join(proc.locations))
            for lname, cell in proc.locals.items():
                lines.append(f"  local {lname} cell={cell} init={self.initial[cell]}")
            for t in proc.transitions:
                timing = "[1,1]" if t.timing == ONE_TICK else "[0,0]"
                lines.append(
                    f"  t{t.tid} {proc.locations[t.src]} -> {proc.locations[t.dst]}"
                    f" {timing} {t.label}")
        for slot in self.svs.values():
            kind = "enum " + "/".join(slot.values) if slot.values else "nat"
            driven = "environment" if slot.environment else "program"
            lines.append(f"sv {slot.name} {kind} {driven} "
                         f"init={slot.decode(self.initial[slot.cell])}")
        return "\n".join(lines) + "\n"

    def process_dot(self, proc: Process):
        """Graph description (DOT) of one automaton for rendering."""
        lines = [f'digraph "{proc.name}" {{', "  rankdir=LR;"]
        for i, loc in enumerate(proc.locations):
            shape = "doublecircle" if i == 0 else "circle"
            lines.append(f'  "{loc}" [shape={shape}];')
        for t in proc.transitions:
            style = ' style=bold' if t.timing == ONE_TICK else ""
            lines.append(
                f'  "{proc.locations[t.src]}" -> "{proc.locations[t.dst]}"'
                f' [label="{t.label}"{style}];')
        lines.append("}")
        return "\n".join(lines) + "\n"

    def describe_state(self, cells):
        """Human-readable one-line state description for traces."""
        parts = []
        for proc in self.processes:
            parts.append(f"{proc.name}@{proc.locations[cells[proc.loc_cell]]}")
        for slot in self.svs.values():
            parts.append(f"{slot.name}={slot.decode(cells[slot.cell])}")
        return " ".join(parts)


def _product(choices):
    if len(choices) == 1:
        for t in choices[0]:
            yield (t,)
        return
    out = [()]
    for group in choices:
        out = [combo + (t,) for combo in out for t in group]
    yield from out
