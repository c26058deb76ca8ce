"""Typed AST for behavior-tree documents in the .btf S-expression format."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class NodeKind(enum.Enum):
    BEHAVIOR_TREE = "BehaviorTree"
    SEQUENCE = "Sequence"
    REACTIVE_SEQUENCE = "ReactiveSequence"
    SEQUENCE_WITH_MEMORY = "SequenceWithMemory"
    FALLBACK = "Fallback"
    REACTIVE_FALLBACK = "ReactiveFallback"
    PARALLEL = "Parallel"
    PARALLEL_ALL = "ParallelAll"
    INVERTER = "Inverter"
    FORCE_FAILURE = "ForceFailure"
    FORCE_SUCCESS = "ForceSuccess"
    REPEAT = "Repeat"
    RETRY_UNTIL_SUCCESSFUL = "RetryUntilSuccessful"
    KEEP_RUNNING_UNTIL_FAILURE = "KeepRunningUntilFailure"
    RECOVERY = "Recovery"
    PIPELINE_SEQUENCE = "PipelineSequence"
    ROUND_ROBIN = "RoundRobin"
    RATE_CONTROLLER = "RateController"
    ACTION = "Action"
    CONDITION = "Condition"
    SET_SV = "SetSV"
    EVAL = "Eval"


LEAF_KINDS = frozenset({
    NodeKind.ACTION, NodeKind.CONDITION, NodeKind.SET_SV, NodeKind.EVAL,
})

DECORATOR_KINDS = frozenset({
    NodeKind.INVERTER, NodeKind.FORCE_FAILURE, NodeKind.FORCE_SUCCESS,
    NodeKind.REPEAT, NodeKind.RETRY_UNTIL_SUCCESSFUL,
    NodeKind.KEEP_RUNNING_UNTIL_FAILURE, NodeKind.RATE_CONTROLLER,
})

CONTROL_KINDS = frozenset({
    NodeKind.SEQUENCE, NodeKind.REACTIVE_SEQUENCE, NodeKind.SEQUENCE_WITH_MEMORY,
    NodeKind.FALLBACK, NodeKind.REACTIVE_FALLBACK,
    NodeKind.PARALLEL, NodeKind.PARALLEL_ALL,
    NodeKind.PIPELINE_SEQUENCE, NodeKind.ROUND_ROBIN,
})

SEQUENCE_FAMILY = frozenset({
    NodeKind.SEQUENCE, NodeKind.REACTIVE_SEQUENCE, NodeKind.SEQUENCE_WITH_MEMORY,
})

FALLBACK_FAMILY = frozenset({NodeKind.FALLBACK, NodeKind.REACTIVE_FALLBACK})


@dataclass(frozen=True)
class SourcePos:
    line: int
    col: int

    def __str__(self):
        return f"{self.line}:{self.col}"


# ---------------------------------------------------------------------------
# Expressions (Eval node bodies and :args values)

class Expr:
    pass


@dataclass(frozen=True)
class Literal(Expr):
    value: object  # int, float, or identifier string


@dataclass(frozen=True)
class SvRef(Expr):
    name: str


@dataclass(frozen=True)
class StatusRef(Expr):
    """Reads the last returned status of a node, written `name.rstatus`."""
    node_name: str


@dataclass(frozen=True)
class ArgRef(Expr):
    """A `$name` substitution inside :args values."""
    name: str


@dataclass(frozen=True)
class Eq(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Not(Expr):
    operand: Expr


@dataclass(frozen=True)
class Assign(Expr):
    sv_name: str
    value: Expr


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr


# ---------------------------------------------------------------------------
# State-variable declarations

ALL_PAIRS = "all"


@dataclass
class SvDecl:
    name: str
    pos: SourcePos
    # Enumerated kind
    states: list[str] | None = None
    transitions: object = None  # ALL_PAIRS or list[(str, str)]
    # BoundedNat kind
    min: int | None = None
    max: int | None = None
    init: object = None  # state identifier or int

    @property
    def is_enumerated(self):
        return self.states is not None

    def values(self):
        """All values this SV can take, in declaration order."""
        if self.is_enumerated:
            return list(self.states)
        return list(range(self.min, self.max + 1))

    def successors(self, value):
        """Values reachable from `value` in one step of the transition relation."""
        if self.is_enumerated:
            if self.transitions == ALL_PAIRS:
                return list(self.states)
            return [b for (a, b) in self.transitions if a == value]
        # BoundedNat: assignment-driven, any in-range value
        return list(range(self.min, self.max + 1))


# ---------------------------------------------------------------------------
# Tree nodes

@dataclass
class NodeAst:
    kind: NodeKind
    attrs: dict[str, object] = field(default_factory=dict)
    children: list["NodeAst"] = field(default_factory=list)
    expr: Expr | None = None  # Eval only
    pos: SourcePos = SourcePos(0, 0)
    canonical_name: str | None = None  # assigned by the validator
    index: int = 0  # 1-based pre-order index, assigned by the validator

    @property
    def id_attr(self):
        return self.attrs.get("ID")

    @property
    def name_attr(self):
        return self.attrs.get("name")

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass
class BtSpec:
    svs: list[SvDecl]
    trees: list[NodeAst]  # each a BehaviorTree root

    def sv(self, name):
        for decl in self.svs:
            if decl.name == name:
                return decl
        raise KeyError(name)

    def tree(self, name=None):
        if name is None:
            return self.trees[0]
        for t in self.trees:
            if t.attrs.get("name") == name or t.attrs.get("ID") == name:
                return t
        raise KeyError(name)
